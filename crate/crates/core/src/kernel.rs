//! Semi-separable kernels and their block structure.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, C1};
use crate::quadrature::Quadrature;

type Evaluator = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Closed(Evaluator),
    Sampled { xs: Vec<f64>, values: Vec<CMatrix>, degree: usize },
}

/// Matrix-valued function of one real variable with a fixed shape.
#[derive(Clone)]
pub struct OperatorFunction {
    rows: usize,
    cols: usize,
    interval: (f64, f64),
    repr: Repr,
}

impl std::fmt::Debug for OperatorFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.repr {
            Repr::Closed(_) => "closed".to_string(),
            Repr::Sampled { xs, degree, .. } => format!("sampled({} points, degree {degree})", xs.len()),
        };
        write!(f, "OperatorFunction({}x{} on {:?}, {kind})", self.rows, self.cols, self.interval)
    }
}

impl OperatorFunction {
    pub fn new(
        rows: usize,
        cols: usize,
        interval: (f64, f64),
        f: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        OperatorFunction { rows, cols, interval, repr: Repr::Closed(Arc::new(f)) }
    }

    pub fn constant(m: CMatrix, interval: (f64, f64)) -> Self {
        let (rows, cols) = m.shape();
        Self::new(rows, cols, interval, move |_| m.clone())
    }

    pub fn zero(rows: usize, cols: usize, interval: (f64, f64)) -> Self {
        Self::constant(CMatrix::zeros(rows, cols), interval)
    }

    /// Scalar (1×1) function.
    pub fn scalar(interval: (f64, f64), f: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::new(1, 1, interval, move |x| CMatrix::scalar(f(x)))
    }

    /// Piecewise-polynomial interpolant of degree `degree ≤ 3` through the samples.
    pub fn sampled(xs: Vec<f64>, values: Vec<CMatrix>, degree: usize) -> Result<Self> {
        if xs.len() != values.len() || xs.is_empty() {
            return Err(Error::Dimension(format!("{} abscissae for {} samples", xs.len(), values.len())));
        }
        if degree > 3 {
            return Err(Error::Contract(format!("interpolation degree {degree} > 3")));
        }
        if xs.len() < degree + 1 {
            return Err(Error::Contract(format!("{} samples cannot carry degree {degree}", xs.len())));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract("sample abscissae must be strictly increasing".into()));
        }
        let (rows, cols) = values[0].shape();
        if values.iter().any(|v| v.shape() != (rows, cols)) {
            return Err(Error::Dimension("samples have differing shapes".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite sample {v:?}")));
        }
        let interval = (xs[0], *xs.last().unwrap());
        Ok(OperatorFunction { rows, cols, interval, repr: Repr::Sampled { xs, values, degree } })
    }

    /// Reads samples from CSV with a header row and columns `x, Re(M11), Im(M11), Re(M12), ...`.
    pub fn from_csv_reader<R: Read>(reader: R, rows: usize, cols: usize, degree: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let width = 1 + 2 * rows * cols;
        let header_len = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.len();
        if header_len != width {
            return Err(Error::Parse(format!("header has {header_len} columns, expected {width}")));
        }
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            if rec.len() != width {
                return Err(Error::Parse(format!("record {} has {} columns, expected {width}", line + 1, rec.len())));
            }
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("record {}: '{s}': {e}", line + 1))))
                .collect::<Result<_>>()?;
            xs.push(nums[0]);
            let entries = nums[1..].chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
            values.push(CMatrix::from_vec(rows, cols, entries)?);
        }
        Self::sampled(xs, values, degree)
    }

    pub fn from_csv(path: impl AsRef<Path>, rows: usize, cols: usize, degree: usize) -> Result<Self> {
        let file =
            std::fs::File::open(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(std::io::BufReader::new(file), rows, cols, degree)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.repr, Repr::Sampled { .. })
    }

    /// Sample abscissae, if any; useful as panel breakpoints.
    pub fn sample_points(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Sampled { xs, .. } => Some(xs),
            Repr::Closed(_) => None,
        }
    }

    pub fn eval(&self, x: f64) -> Result<CMatrix> {
        let (a, b) = self.interval;
        let slack = 1e-12 * (1.0 + a.abs().max(b.abs()).min(1e300));
        if !(x >= a - slack && x <= b + slack) {
            return Err(Error::Domain { x, a, b });
        }
        let m = self.eval_unchecked(x.clamp(a, b));
        debug_assert_eq!(m.shape(), (self.rows, self.cols));
        Ok(m)
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> CMatrix {
        match &self.repr {
            Repr::Closed(f) => f(x),
            Repr::Sampled { xs, values, degree } => interpolate(xs, values, *degree, x),
        }
    }

    /// Pointwise product `self(x) · other(x)`.
    pub fn product(&self, other: &OperatorFunction) -> Result<OperatorFunction> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "product of {}x{} and {}x{} functions",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (l, r) = (self.clone(), other.clone());
        let interval = (self.interval.0.max(other.interval.0), self.interval.1.min(other.interval.1));
        Ok(OperatorFunction::new(self.rows, other.cols, interval, move |x| &l.eval_unchecked(x) * &r.eval_unchecked(x)))
    }

    pub fn map(&self, rows: usize, cols: usize, f: impl Fn(f64, CMatrix) -> CMatrix + Send + Sync + 'static) -> Self {
        let inner = self.clone();
        OperatorFunction::new(rows, cols, self.interval, move |x| f(x, inner.eval_unchecked(x)))
    }
}

fn interpolate(xs: &[f64], values: &[CMatrix], degree: usize, x: f64) -> CMatrix {
    let n = xs.len();
    let k = xs.partition_point(|&s| s <= x).clamp(1, n) - 1;
    if degree == 0 || n == 1 {
        return values[k].clone();
    }
    let npts = degree + 1;
    let start = k.saturating_sub(degree / 2).min(n - npts);
    let pts = start..start + npts;
    let mut out = CMatrix::zeros(values[0].rows(), values[0].cols());
    for j in pts.clone() {
        let mut lj = 1.0;
        for m in pts.clone() {
            if m != j {
                lj *= (x - xs[m]) / (xs[j] - xs[m]);
            }
        }
        out.axpy(Complex64::new(lj, 0.0), &values[j]);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DiagonalConvention {
    #[default]
    Average,
    LowerBranch,
    UpperBranch,
    /// Zero on the diagonal; used for the Volterra parts.
    ZeroDiagonal,
}

impl std::str::FromStr for DiagonalConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "average" => Ok(Self::Average),
            "lower" | "lowerbranch" | "lower_branch" => Ok(Self::LowerBranch),
            "upper" | "upperbranch" | "upper_branch" => Ok(Self::UpperBranch),
            "zero" | "zerodiagonal" | "zero_diagonal" => Ok(Self::ZeroDiagonal),
            other => Err(Error::Parse(format!("unknown diagonal convention '{other}'"))),
        }
    }
}

/// `K(x,x') = F1(x)G1(x')` for `x' < x` and `F2(x)G2(x')` for `x < x'`.
#[derive(Clone, Debug)]
pub struct SemiSeparableKernel {
    pub f1: OperatorFunction,
    pub g1: OperatorFunction,
    pub f2: OperatorFunction,
    pub g2: OperatorFunction,
    interval: (f64, f64),
    pub convention: DiagonalConvention,
    breakpoints: Vec<f64>,
}

impl SemiSeparableKernel {
    pub fn new(
        f1: OperatorFunction,
        g1: OperatorFunction,
        f2: OperatorFunction,
        g2: OperatorFunction,
        interval: (f64, f64),
    ) -> Result<Self> {
        let d = f1.rows();
        if f1.cols() != g1.rows() || g1.cols() != d {
            return Err(Error::Dimension(format!(
                "F1 is {}x{} but G1 is {}x{}",
                f1.rows(),
                f1.cols(),
                g1.rows(),
                g1.cols()
            )));
        }
        if f2.rows() != d || f2.cols() != g2.rows() || g2.cols() != d {
            return Err(Error::Dimension(format!(
                "F2 is {}x{} and G2 is {}x{} for d = {d}",
                f2.rows(),
                f2.cols(),
                g2.rows(),
                g2.cols()
            )));
        }
        let (a, b) = interval;
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InfiniteInterval);
        }
        if a >= b {
            return Err(Error::Contract(format!("empty interval ({a}, {b})")));
        }
        for (name, f) in [("F1", &f1), ("G1", &g1), ("F2", &f2), ("G2", &g2)] {
            let (fa, fb) = f.interval();
            if fa > a + 1e-12 || fb < b - 1e-12 {
                return Err(Error::Contract(format!("{name} defined on ({fa}, {fb}) does not cover ({a}, {b})")));
            }
        }
        Ok(SemiSeparableKernel {
            f1,
            g1,
            f2,
            g2,
            interval,
            convention: DiagonalConvention::Average,
            breakpoints: Vec::new(),
        })
    }

    pub fn with_convention(mut self, convention: DiagonalConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Points where the factors may be non-smooth; grids should put panel edges there.
    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn d(&self) -> usize {
        self.f1.rows()
    }

    pub fn n1(&self) -> usize {
        self.f1.cols()
    }

    pub fn n2(&self) -> usize {
        self.f2.cols()
    }

    fn check(&self, x: f64) -> Result<()> {
        let (a, b) = self.interval;
        if x < a || x > b || x.is_nan() {
            return Err(Error::Domain { x, a, b });
        }
        Ok(())
    }

    pub fn eval_kernel(&self, x: f64, xp: f64) -> Result<CMatrix> {
        self.check(x)?;
        self.check(xp)?;
        let lower = || &self.f1.eval_unchecked(x) * &self.g1.eval_unchecked(xp);
        let upper = || &self.f2.eval_unchecked(x) * &self.g2.eval_unchecked(xp);
        Ok(if xp < x {
            lower()
        } else if x < xp {
            upper()
        } else {
            diagonal_value(self.convention, lower, upper, self.d())
        })
    }

    pub fn eval_h(&self, x: f64, xp: f64) -> Result<CMatrix> {
        self.check(x)?;
        self.check(xp)?;
        Ok(&(&self.f1.eval_unchecked(x) * &self.g1.eval_unchecked(xp))
            - &(&self.f2.eval_unchecked(x) * &self.g2.eval_unchecked(xp)))
    }

    /// `C(x) = [F1(x) F2(x)]`
    pub fn block_c(&self, x: f64) -> Result<CMatrix> {
        self.check(x)?;
        Ok(CMatrix::hstack(&[&self.f1.eval_unchecked(x), &self.f2.eval_unchecked(x)]))
    }

    /// `B(x) = [G1(x); -G2(x)]`
    pub fn block_b(&self, x: f64) -> Result<CMatrix> {
        self.check(x)?;
        Ok(CMatrix::vstack(&[&self.g1.eval_unchecked(x), &(-&self.g2.eval_unchecked(x))]))
    }

    /// `A(x) = [[G1F1, G1F2], [-G2F1, -G2F2]](x)`
    pub fn block_a(&self, x: f64) -> Result<CMatrix> {
        self.check(x)?;
        let (f1, f2) = (self.f1.eval_unchecked(x), self.f2.eval_unchecked(x));
        let (g1, g2) = (self.g1.eval_unchecked(x), self.g2.eval_unchecked(x));
        let top = CMatrix::hstack(&[&(&g1 * &f1), &(&g1 * &f2)]);
        let bottom = CMatrix::hstack(&[&(-&(&g2 * &f1)), &(-&(&g2 * &f2))]);
        Ok(CMatrix::vstack(&[&top, &bottom]))
    }

    /// Projector `diag(0, I_{n2})`.
    pub fn p0(&self) -> CMatrix {
        let (n1, n2) = (self.n1(), self.n2());
        CMatrix::from_fn(n1 + n2, n1 + n2, |i, j| if i == j && i >= n1 { C1 } else { Complex64::new(0.0, 0.0) })
    }

    /// Factor values at every node of `grid`.
    pub fn sample(&self, grid: &Quadrature) -> Result<FactorSamples> {
        let (a, b) = grid.interval();
        let (ka, kb) = self.interval;
        let tol = 1e-12 * (1.0 + (kb - ka).abs());
        if (a - ka).abs() > tol || (b - kb).abs() > tol {
            return Err(Error::Contract(format!("grid on ({a}, {b}) does not match kernel interval ({ka}, {kb})")));
        }
        let mut s = FactorSamples {
            f1: Vec::with_capacity(grid.len()),
            g1: Vec::with_capacity(grid.len()),
            f2: Vec::with_capacity(grid.len()),
            g2: Vec::with_capacity(grid.len()),
        };
        for &x in grid.nodes() {
            s.f1.push(self.f1.eval_unchecked(x));
            s.g1.push(self.g1.eval_unchecked(x));
            s.f2.push(self.f2.eval_unchecked(x));
            s.g2.push(self.g2.eval_unchecked(x));
        }
        for (i, x) in grid.nodes().iter().enumerate() {
            for m in [&s.f1[i], &s.g1[i], &s.f2[i], &s.g2[i]] {
                if !m.is_finite() {
                    return Err(Error::Contract(format!("non-finite factor value at x = {x}")));
                }
            }
        }
        Ok(s)
    }
}

pub(crate) fn diagonal_value(
    convention: DiagonalConvention,
    lower: impl FnOnce() -> CMatrix,
    upper: impl FnOnce() -> CMatrix,
    d: usize,
) -> CMatrix {
    match convention {
        DiagonalConvention::Average => {
            let mut m = lower();
            m += &upper();
            m.scale(Complex64::new(0.5, 0.0))
        }
        DiagonalConvention::LowerBranch => lower(),
        DiagonalConvention::UpperBranch => upper(),
        DiagonalConvention::ZeroDiagonal => CMatrix::zeros(d, d),
    }
}

/// Factor values on a grid, plus the derived `C` and `B` blocks.
#[derive(Clone, Debug)]
pub struct FactorSamples {
    pub f1: Vec<CMatrix>,
    pub g1: Vec<CMatrix>,
    pub f2: Vec<CMatrix>,
    pub g2: Vec<CMatrix>,
}

impl FactorSamples {
    pub fn c(&self, i: usize) -> CMatrix {
        CMatrix::hstack(&[&self.f1[i], &self.f2[i]])
    }

    pub fn b(&self, i: usize) -> CMatrix {
        CMatrix::vstack(&[&self.g1[i], &(-&self.g2[i])])
    }

    pub fn len(&self) -> usize {
        self.f1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f1.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::C0;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn constant_kernel(f1: f64, g1: f64, f2: f64, g2: f64) -> SemiSeparableKernel {
        let i = (0.0, 1.0);
        SemiSeparableKernel::new(
            OperatorFunction::scalar(i, move |_| c(f1)),
            OperatorFunction::scalar(i, move |_| c(g1)),
            OperatorFunction::scalar(i, move |_| c(f2)),
            OperatorFunction::scalar(i, move |_| c(g2)),
            i,
        )
        .unwrap()
    }

    #[test]
    fn zero_factors_give_zero_kernel() {
        let k = constant_kernel(0.0, 0.0, 0.0, 0.0);
        assert_eq!(k.eval_kernel(0.3, 0.7).unwrap().max_abs(), 0.0);
        assert_eq!(k.block_a(0.4).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn separable_exponential_value() {
        let i = (0.0, 1.0);
        let e = OperatorFunction::scalar(i, |x| c(x.exp()));
        let em = OperatorFunction::scalar(i, |x| c((-x).exp()));
        let k = SemiSeparableKernel::new(e.clone(), em.clone(), e, em, i).unwrap();
        assert!((k.eval_kernel(0.5, 0.2).unwrap()[(0, 0)] - c(0.3f64.exp())).norm() < 1e-15);
        assert!((0.3f64.exp() - 1.3498588).abs() < 1e-7);
        assert_eq!(k.eval_h(0.1, 0.9).unwrap()[(0, 0)], C0);
    }

    #[test]
    fn diagonal_conventions() {
        let k = constant_kernel(2.0, 1.0, 4.0, 1.0);
        assert_eq!(k.eval_kernel(0.5, 0.5).unwrap()[(0, 0)], c(3.0));
        let lo = k.clone().with_convention(DiagonalConvention::LowerBranch);
        assert_eq!(lo.eval_kernel(0.5, 0.5).unwrap()[(0, 0)], c(2.0));
        let up = k.clone().with_convention(DiagonalConvention::UpperBranch);
        assert_eq!(up.eval_kernel(0.5, 0.5).unwrap()[(0, 0)], c(4.0));
        let z = k.with_convention(DiagonalConvention::ZeroDiagonal);
        assert_eq!(z.eval_kernel(0.5, 0.5).unwrap()[(0, 0)], C0);
    }

    #[test]
    fn h_constant_minus_one() {
        let k = constant_kernel(1.0, 1.0, 2.0, 1.0);
        assert_eq!(k.eval_h(0.2, 0.8).unwrap()[(0, 0)], c(-1.0));
    }

    #[test]
    fn unit_factors_give_nilpotent_a() {
        let k = constant_kernel(1.0, 1.0, 1.0, 1.0);
        let a = k.block_a(0.5).unwrap();
        assert_eq!(a, CMatrix::from_real(2, 2, &[1.0, 1.0, -1.0, -1.0]).unwrap());
        assert_eq!((&a * &a).max_abs(), 0.0);
    }

    #[test]
    fn domain_errors() {
        let k = constant_kernel(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(k.eval_kernel(1.5, 0.2), Err(Error::Domain { .. })));
        assert!(matches!(k.block_a(-0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let i = (0.0, 1.0);
        let r = SemiSeparableKernel::new(
            OperatorFunction::zero(2, 1, i),
            OperatorFunction::zero(2, 2, i),
            OperatorFunction::zero(2, 1, i),
            OperatorFunction::zero(1, 2, i),
            i,
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn csv_round_trip_and_interpolation() {
        let mut text = String::from("x,re11,im11,re12,im12\n");
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            text.push_str(&format!("{x},{},{},{},0\n", x * x, -x, x * x * x));
        }
        let f = OperatorFunction::from_csv_reader(text.as_bytes(), 1, 2, 3).unwrap();
        assert_eq!(f.interval(), (0.0, 1.0));
        let m = f.eval(0.537).unwrap();
        assert!((m[(0, 0)] - Complex64::new(0.537 * 0.537, -0.537)).norm() < 1e-14);
        assert!((m[(0, 1)] - c(0.537f64.powi(3))).norm() < 1e-14);
        assert!(f.eval(1.2).is_err());
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(OperatorFunction::from_csv_reader("x,a\n0,1\n".as_bytes(), 1, 1, 0), Err(Error::Parse(_))));
        assert!(matches!(
            OperatorFunction::from_csv_reader("x,a,b\n0,1,zz\n".as_bytes(), 1, 1, 0),
            Err(Error::Parse(_))
        ));
        assert!(OperatorFunction::from_csv("/nonexistent/file.csv", 1, 1, 1).is_err());
    }
}
