//! Composite quadrature grids and interval truncation.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const DEFAULT_NODES_PER_PANEL: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    GaussLegendre,
    /// Equal-weight rule with nodes at subcell midpoints.
    Trapezoid,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gauss_legendre" | "gausslegendre" | "gl" => Ok(Scheme::GaussLegendre),
            "trapezoid" | "midpoint" => Ok(Scheme::Trapezoid),
            other => Err(Error::Parse(format!("unknown quadrature scheme '{other}'"))),
        }
    }
}

/// Reference rule on [-1, 1] together with its cumulative integration and
/// differentiation matrices.
#[derive(Clone, Debug)]
struct Reference {
    t: Vec<f64>,
    w: Vec<f64>,
    /// `s[i*m + j]`: weight of sample j in the integral from -1 to `t[i]`.
    s: Vec<f64>,
    /// `d[i*m + j]`: weight of sample j in the derivative at `t[i]`.
    d: Vec<f64>,
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    // returns (P_n(x), P_{n-1}(x))
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Gauss–Legendre nodes (ascending) and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut t = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, pm1) = legendre(m, x);
            dp = m as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, pm1) = legendre(m, x);
        dp = if p.is_finite() { m as f64 * (x * p - pm1) / (x * x - 1.0) } else { dp };
        let wi = 2.0 / ((1.0 - x * x) * dp * dp);
        t[i] = -x;
        t[m - 1 - i] = x;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        t[m / 2] = 0.0;
    }
    (t, w)
}

fn barycentric_diff(t: &[f64], lambda: &[f64]) -> Vec<f64> {
    let m = t.len();
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        let mut diag = 0.0;
        for j in 0..m {
            if i != j {
                let v = lambda[j] / lambda[i] / (t[i] - t[j]);
                d[i * m + j] = v;
                diag -= v;
            }
        }
        d[i * m + i] = diag;
    }
    d
}

impl Reference {
    fn new(m: usize, scheme: Scheme) -> Self {
        match scheme {
            Scheme::GaussLegendre => {
                let (t, w) = gauss_legendre(m);
                let mut s = vec![0.0; m * m];
                let pt: Vec<Vec<f64>> = t.iter().map(|&x| (0..=m).map(|n| legendre(n, x).0).collect()).collect();
                for i in 0..m {
                    for j in 0..m {
                        let mut acc = 0.5 * (t[i] + 1.0);
                        for n in 1..m {
                            acc += 0.5 * pt[j][n] * (pt[i][n + 1] - pt[i][n - 1]);
                        }
                        s[i * m + j] = w[j] * acc;
                    }
                }
                let lambda: Vec<f64> = (0..m)
                    .map(|j| {
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        sign * ((1.0 - t[j] * t[j]) * w[j]).sqrt()
                    })
                    .collect();
                let d = barycentric_diff(&t, &lambda);
                Reference { t, w, s, d }
            }
            Scheme::Trapezoid => {
                let h = 2.0 / m as f64;
                let t: Vec<f64> = (0..m).map(|i| -1.0 + h * (i as f64 + 0.5)).collect();
                let w = vec![h; m];
                let mut s = vec![0.0; m * m];
                for i in 0..m {
                    for j in 0..i {
                        s[i * m + j] = h;
                    }
                    s[i * m + i] = 0.5 * h;
                }
                let mut d = vec![0.0; m * m];
                if m == 2 {
                    d.copy_from_slice(&[-1.0 / h, 1.0 / h, -1.0 / h, 1.0 / h]);
                } else {
                    for i in 0..m {
                        if i == 0 {
                            d[0] = -1.5 / h;
                            d[1] = 2.0 / h;
                            d[2] = -0.5 / h;
                        } else if i == m - 1 {
                            d[i * m + i] = 1.5 / h;
                            d[i * m + i - 1] = -2.0 / h;
                            d[i * m + i - 2] = 0.5 / h;
                        } else {
                            d[i * m + i - 1] = -0.5 / h;
                            d[i * m + i + 1] = 0.5 / h;
                        }
                    }
                }
                Reference { t, w, s, d }
            }
        }
    }
}

/// Composite rule on a finite interval.
#[derive(Clone, Debug)]
pub struct Quadrature {
    a: f64,
    b: f64,
    scheme: Scheme,
    m: usize,
    edges: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    reference: Arc<Reference>,
}

impl Quadrature {
    /// Equal panels on `(a, b)`.
    pub fn new(a: f64, b: f64, n_per_panel: usize, panels: usize, scheme: Scheme) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InfiniteInterval);
        }
        if panels == 0 {
            return Err(Error::Contract("at least one panel required".into()));
        }
        let edges: Vec<f64> =
            (0..=panels).map(|p| if p == panels { b } else { a + (b - a) * p as f64 / panels as f64 }).collect();
        Self::from_edges(&edges, n_per_panel, scheme)
    }

    /// Panels with the given strictly increasing boundaries.
    pub fn from_edges(edges: &[f64], n_per_panel: usize, scheme: Scheme) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Contract("at least two panel edges required".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InfiniteInterval);
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract("panel edges must be strictly increasing".into()));
        }
        if n_per_panel < 2 {
            return Err(Error::Contract(format!("n_per_panel = {n_per_panel} < 2")));
        }
        let reference = Arc::new(Reference::new(n_per_panel, scheme));
        let mut nodes = Vec::with_capacity(n_per_panel * (edges.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in edges.windows(2) {
            let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for (t, wt) in reference.t.iter().zip(&reference.w) {
                nodes.push(mid + half * t);
                weights.push(half * wt);
            }
        }
        Ok(Quadrature {
            a: edges[0],
            b: *edges.last().unwrap(),
            scheme,
            m: n_per_panel,
            edges: edges.to_vec(),
            nodes,
            weights,
            reference,
        })
    }

    /// Panels no longer than `max_len`, with every breakpoint inside `(a, b)` on a panel edge.
    pub fn with_breakpoints(
        a: f64,
        b: f64,
        breakpoints: &[f64],
        n_per_panel: usize,
        max_len: f64,
        scheme: Scheme,
    ) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InfiniteInterval);
        }
        if !(max_len > 0.0) {
            return Err(Error::Contract("max panel length must be positive".into()));
        }
        let span = b - a;
        let mut cuts: Vec<f64> = vec![a];
        let mut inner: Vec<f64> =
            breakpoints.iter().cloned().filter(|&x| x > a + 1e-12 * span && x < b - 1e-12 * span).collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * span);
        cuts.extend(inner);
        cuts.push(b);
        let mut edges = vec![a];
        for w in cuts.windows(2) {
            let k = ((w[1] - w[0]) / max_len).ceil().max(1.0) as usize;
            for p in 1..=k {
                edges.push(if p == k { w[1] } else { w[0] + (w[1] - w[0]) * p as f64 / k as f64 });
            }
        }
        Self::from_edges(&edges, n_per_panel, scheme)
    }

    /// Same panels each split in two.
    pub fn refined(&self) -> Self {
        let mut edges = Vec::with_capacity(2 * self.edges.len());
        for w in self.edges.windows(2) {
            edges.push(w[0]);
            edges.push(0.5 * (w[0] + w[1]));
        }
        edges.push(self.b);
        Self::from_edges(&edges, self.m, self.scheme).expect("refinement of a valid grid")
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panels(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn n_per_panel(&self) -> usize {
        self.m
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn panel_range(&self, p: usize) -> Range<usize> {
        p * self.m..(p + 1) * self.m
    }

    pub fn panel_bounds(&self, p: usize) -> (f64, f64) {
        (self.edges[p], self.edges[p + 1])
    }

    /// Reference nodes on [-1, 1].
    pub fn reference_nodes(&self) -> &[f64] {
        &self.reference.t
    }

    /// Weights for `∫_{panel start}^{x_i} f` from samples on panel `p` (row-major m×m).
    pub fn forward_matrix(&self, p: usize) -> Vec<f64> {
        let half = 0.5 * (self.edges[p + 1] - self.edges[p]);
        self.reference.s.iter().map(|s| s * half).collect()
    }

    /// Weights for `∫_{x_i}^{panel end} f` from samples on panel `p` (row-major m×m).
    pub fn backward_matrix(&self, p: usize) -> Vec<f64> {
        let half = 0.5 * (self.edges[p + 1] - self.edges[p]);
        let m = self.m;
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = half * (self.reference.w[j] - self.reference.s[i * m + j]);
            }
        }
        out
    }

    /// Differentiation weights on panel `p` (row-major m×m).
    pub fn diff_matrix(&self, p: usize) -> Vec<f64> {
        let half = 0.5 * (self.edges[p + 1] - self.edges[p]);
        self.reference.d.iter().map(|d| d / half).collect()
    }

    /// Index of the panel containing `x` (closed on the left).
    pub fn panel_of(&self, x: f64) -> Option<usize> {
        if x < self.a || x > self.b {
            return None;
        }
        let p = self.edges.partition_point(|&e| e <= x);
        Some(p.saturating_sub(1).min(self.panels() - 1))
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Cumulative integrals `∫_a^{x_i} f` at every node from samples `f(x_j)`.
    pub fn cumulative(&self, samples: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; self.len()];
        let mut acc = 0.0;
        for p in 0..self.panels() {
            let s = self.forward_matrix(p);
            let r = self.panel_range(p);
            let f = &samples[r.clone()];
            for i in 0..m {
                out[r.start + i] = acc + (0..m).map(|j| s[i * m + j] * f[j]).sum::<f64>();
            }
            acc += r.clone().map(|j| self.weights[j] * samples[j]).sum::<f64>();
        }
        out
    }
}

/// Scalar majorant of a potential or kernel factor norm, used to pick a finite interval.
#[derive(Clone)]
pub enum Envelope {
    Zero,
    /// `amplitude · exp(-rate |x - center|)`
    Exponential {
        amplitude: f64,
        rate: f64,
        center: f64,
    },
    /// `amplitude` on `[lo, hi]`, zero outside.
    Compact {
        amplitude: f64,
        lo: f64,
        hi: f64,
    },
    /// `amplitude · exp(-(x - center)² / (2 σ²))`
    Gaussian {
        amplitude: f64,
        sigma: f64,
        center: f64,
    },
    Sum(Vec<Envelope>),
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        center: f64,
    },
}

impl std::fmt::Debug for Envelope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Envelope::Zero => write!(f, "Zero"),
            Envelope::Exponential { amplitude, rate, center } => {
                write!(f, "Exponential({amplitude}, {rate}, {center})")
            }
            Envelope::Compact { amplitude, lo, hi } => write!(f, "Compact({amplitude}, [{lo}, {hi}])"),
            Envelope::Gaussian { amplitude, sigma, center } => {
                write!(f, "Gaussian({amplitude}, {sigma}, {center})")
            }
            Envelope::Sum(v) => f.debug_list().entries(v).finish(),
            Envelope::Custom { center, .. } => write!(f, "Custom(center {center})"),
        }
    }
}

impl Envelope {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Envelope::Custom { f: Arc::new(f), center: 0.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Envelope::Zero => 0.0,
            Envelope::Exponential { amplitude, rate, center } => amplitude * (-rate * (x - center).abs()).exp(),
            Envelope::Compact { amplitude, lo, hi } => {
                if x >= *lo && x <= *hi {
                    *amplitude
                } else {
                    0.0
                }
            }
            Envelope::Gaussian { amplitude, sigma, center } => {
                let u = (x - center) / sigma;
                amplitude * (-0.5 * u * u).exp()
            }
            Envelope::Sum(v) => v.iter().map(|e| e.eval(x)).sum(),
            Envelope::Custom { f, .. } => f(x),
        }
    }

    fn center(&self) -> f64 {
        match self {
            Envelope::Zero => 0.0,
            Envelope::Exponential { center, .. } | Envelope::Gaussian { center, .. } => *center,
            Envelope::Compact { lo, hi, .. } => 0.5 * (lo + hi),
            Envelope::Sum(v) => v.first().map_or(0.0, |e| e.center()),
            Envelope::Custom { center, .. } => *center,
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Envelope::Zero => true,
            Envelope::Compact { amplitude, .. }
            | Envelope::Exponential { amplitude, .. }
            | Envelope::Gaussian { amplitude, .. } => *amplitude == 0.0,
            Envelope::Sum(v) => v.iter().all(|e| e.is_zero()),
            Envelope::Custom { .. } => false,
        }
    }

    /// `∫_x^∞` of the envelope.
    pub fn tail_right(&self, x: f64) -> f64 {
        match self {
            Envelope::Zero => 0.0,
            Envelope::Exponential { amplitude, rate, center } => {
                if x >= *center {
                    amplitude / rate * (-rate * (x - center)).exp()
                } else {
                    amplitude / rate * (2.0 - (-rate * (center - x)).exp())
                }
            }
            Envelope::Compact { amplitude, lo, hi } => amplitude * (hi - x.max(*lo)).max(0.0),
            Envelope::Sum(v) => v.iter().map(|e| e.tail_right(x)).sum(),
            _ => numeric_tail(|s| self.eval(s), x),
        }
    }

    /// `∫_{-∞}^x` of the envelope.
    pub fn tail_left(&self, x: f64) -> f64 {
        match self {
            Envelope::Zero => 0.0,
            Envelope::Exponential { amplitude, rate, center } => {
                Envelope::Exponential { amplitude: *amplitude, rate: *rate, center: -center }.tail_right(-x)
            }
            Envelope::Compact { amplitude, lo, hi } => amplitude * (x.min(*hi) - lo).max(0.0),
            Envelope::Sum(v) => v.iter().map(|e| e.tail_left(x)).sum(),
            _ => numeric_tail(|s| self.eval(-s), -x),
        }
    }

    fn closed_right(&self, tol: f64) -> Option<f64> {
        match self {
            Envelope::Exponential { amplitude, rate, center } if *amplitude > 0.0 && *rate > 0.0 => {
                let mass = amplitude / rate;
                if mass <= tol {
                    return None;
                }
                Some(center + (mass / tol).ln() / rate)
            }
            Envelope::Compact { hi, .. } => Some(*hi),
            _ => None,
        }
    }

    fn closed_left(&self, tol: f64) -> Option<f64> {
        match self {
            Envelope::Exponential { amplitude, rate, center } if *amplitude > 0.0 && *rate > 0.0 => {
                let mass = amplitude / rate;
                if mass <= tol {
                    return None;
                }
                Some(center - (mass / tol).ln() / rate)
            }
            Envelope::Compact { lo, .. } => Some(*lo),
            _ => None,
        }
    }
}

/// `∫_x^∞ f` via `s ↦ x + L s/(1-s)`, `L = 1 + |x|`, on geometrically graded panels.
fn numeric_tail(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let (t, w) = gauss_legendre(20);
    let len = 1.0 + x.abs();
    let mut total = 0.0;
    let mut lo = 0.0;
    for k in 1..=40 {
        let hi = 1.0 - 0.5f64.powi(k);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (ti, wi) in t.iter().zip(&w) {
            let s = mid + half * ti;
            let jac = len / ((1.0 - s) * (1.0 - s));
            total += half * wi * f(x + len * s / (1.0 - s)) * jac;
        }
        lo = hi;
    }
    total
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncationReport {
    pub original: (f64, f64),
    pub truncated: (f64, f64),
    pub tail_mass: f64,
    pub requested_tol: f64,
}

const MAX_DOUBLINGS: usize = 60;

fn search_right(env: &Envelope, start: f64, tol: f64) -> Result<f64> {
    let mut step = 1.0;
    let mut lo = start;
    let mut hi = start + step;
    let mut k = 0;
    while env.tail_right(hi) > tol {
        k += 1;
        if k > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Truncation { endpoint: hi, tail: env.tail_right(hi), tol });
        }
        lo = hi;
        step *= 2.0;
        hi = start + step;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-10 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if env.tail_right(mid) > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

fn search_left(env: &Envelope, start: f64, tol: f64) -> Result<f64> {
    let mirrored = Envelope::custom({
        let env = env.clone();
        move |x| env.eval(-x)
    });
    let mirrored = match env {
        Envelope::Exponential { amplitude, rate, center } => {
            Envelope::Exponential { amplitude: *amplitude, rate: *rate, center: -center }
        }
        _ => mirrored,
    };
    search_right(&mirrored, -start, tol).map(|x| -x)
}

/// Finite interval whose discarded tails carry envelope mass at most `tol`.
///
/// On the full line each side receives `tol / 2`. A zero envelope keeps finite
/// endpoints and replaces an infinite one by the finite endpoint ± 1.
pub fn truncate_interval(envelope: &Envelope, original: (f64, f64), tol: f64) -> Result<TruncationReport> {
    let (a0, b0) = original;
    if !(tol > 0.0) {
        return Err(Error::Contract("truncation tolerance must be positive".into()));
    }
    if a0.is_nan() || b0.is_nan() || a0 >= b0 {
        return Err(Error::Contract(format!("invalid interval ({a0}, {b0})")));
    }
    let report = |a: f64, b: f64, tail: f64| TruncationReport {
        original,
        truncated: (a, b),
        tail_mass: tail,
        requested_tol: tol,
    };
    if a0.is_finite() && b0.is_finite() {
        return Ok(report(a0, b0, 0.0));
    }
    if envelope.is_zero() {
        let (a, b) = match (a0.is_finite(), b0.is_finite()) {
            (true, false) => (a0, a0 + 1.0),
            (false, true) => (b0 - 1.0, b0),
            _ => (envelope.center() - 1.0, envelope.center() + 1.0),
        };
        return Ok(report(a, b, 0.0));
    }
    let both = !a0.is_finite() && !b0.is_finite();
    let side_tol = if both { 0.5 * tol } else { tol };
    let center = envelope.center();
    let b = if b0.is_finite() {
        b0
    } else {
        let start = if a0.is_finite() { a0.max(center) } else { center };
        let cand = match envelope.closed_right(side_tol) {
            Some(x) => x,
            None => search_right(envelope, start, side_tol)?,
        };
        cand.max(if a0.is_finite() { a0 } else { f64::NEG_INFINITY })
    };
    let a = if a0.is_finite() {
        a0
    } else {
        let start = if b0.is_finite() { b0.min(center) } else { center };
        let cand = match envelope.closed_left(side_tol) {
            Some(x) => x,
            None => search_left(envelope, start, side_tol)?,
        };
        cand.min(if b0.is_finite() { b0 } else { f64::INFINITY })
    };
    let (a, b) = if a >= b { (a, a + 1.0) } else { (a, b) };
    let mut tail = 0.0;
    if !b0.is_finite() {
        tail += envelope.tail_right(b);
    }
    if !a0.is_finite() {
        tail += envelope.tail_left(a);
    }
    if tail > tol * (1.0 + 1e-9) {
        return Err(Error::Truncation { endpoint: b, tail, tol });
    }
    Ok(report(a, b, tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let q = Quadrature::new(0.0, 1.0, 2, 1, Scheme::GaussLegendre).unwrap();
        let h = 0.5 / 3f64.sqrt();
        assert!((q.nodes()[0] - (0.5 - h)).abs() < 1e-15);
        assert!((q.nodes()[1] - (0.5 + h)).abs() < 1e-15);
        assert!((q.weights()[0] - 0.5).abs() < 1e-15 && (q.weights()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weight_sum_two_panels() {
        let q = Quadrature::new(0.0, 2.0, 2, 2, Scheme::GaussLegendre).unwrap();
        assert_eq!(q.len(), 4);
        assert!((q.weights().iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn three_point_exact_for_x_squared() {
        let q = Quadrature::new(0.0, 1.0, 3, 1, Scheme::GaussLegendre).unwrap();
        assert!((q.integrate(|x| x * x) - 1.0 / 3.0).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn infinite_endpoint_rejected() {
        assert_eq!(
            Quadrature::new(0.0, f64::INFINITY, 4, 1, Scheme::GaussLegendre).unwrap_err(),
            Error::InfiniteInterval
        );
        assert!(Quadrature::new(0.0, 1.0, 1, 1, Scheme::GaussLegendre).is_err());
        assert!(Quadrature::new(0.0, 1.0, 4, 0, Scheme::GaussLegendre).is_err());
    }

    #[test]
    fn exactness_by_degree() {
        for m in [2, 5, 8, 16, 24] {
            let q = Quadrature::new(-0.3, 1.7, m, 1, Scheme::GaussLegendre).unwrap();
            for deg in 0..2 * m {
                let exact = (1.7f64.powi(deg as i32 + 1) - (-0.3f64).powi(deg as i32 + 1)) / (deg as f64 + 1.0);
                let got = q.integrate(|x| x.powi(deg as i32));
                assert!((got - exact).abs() <= 1e-13 * exact.abs().max(1.0), "m={m} deg={deg}");
            }
        }
    }

    #[test]
    fn trapezoid_nodes_interior_and_weights_sum() {
        let q = Quadrature::new(0.0, 3.0, 5, 3, Scheme::Trapezoid).unwrap();
        assert!(q.nodes().iter().all(|&x| x > 0.0 && x < 3.0));
        assert!((q.weights().iter().sum::<f64>() - 3.0).abs() < 1e-14);
        let e1 = (q.integrate(|x| x.sin()) - (1.0 - 3f64.cos())).abs();
        let e2 = (q.refined().integrate(|x| x.sin()) - (1.0 - 3f64.cos())).abs();
        assert!(e2 < e1 && e1 / e2 > 3.5);
    }

    #[test]
    fn cumulative_integration_is_spectral() {
        let q = Quadrature::new(0.0, 2.0, 12, 3, Scheme::GaussLegendre).unwrap();
        let f: Vec<f64> = q.nodes().iter().map(|x| x.cos()).collect();
        let c = q.cumulative(&f);
        for (x, ci) in q.nodes().iter().zip(&c) {
            assert!((ci - x.sin()).abs() < 1e-13);
        }
        let p = 1;
        let r = q.panel_range(p);
        let back = q.backward_matrix(p);
        let (_, end) = q.panel_bounds(p);
        for i in 0..12 {
            let x = q.nodes()[r.start + i];
            let v: f64 = (0..12).map(|j| back[i * 12 + j] * f[r.start + j]).sum();
            assert!((v - (end.sin() - x.sin())).abs() < 1e-13);
        }
    }

    #[test]
    fn differentiation_is_spectral() {
        let q = Quadrature::new(0.0, 1.0, 16, 2, Scheme::GaussLegendre).unwrap();
        for p in 0..2 {
            let r = q.panel_range(p);
            let d = q.diff_matrix(p);
            for i in 0..16 {
                let v: f64 = (0..16).map(|j| d[i * 16 + j] * q.nodes()[r.start + j].exp()).sum();
                assert!((v - q.nodes()[r.start + i].exp()).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn breakpoints_land_on_edges() {
        let q = Quadrature::with_breakpoints(-2.0, 3.0, &[0.0, 1.0, 7.0], 8, 0.7, Scheme::GaussLegendre).unwrap();
        assert!(q.edges().contains(&0.0) && q.edges().contains(&1.0));
        assert!(q.edges().windows(2).all(|w| w[1] - w[0] <= 0.7 + 1e-12));
        assert_eq!(q.panel_of(0.0), Some(q.edges().iter().position(|&e| e == 0.0).unwrap()));
        assert_eq!(q.panel_of(3.0), Some(q.panels() - 1));
        assert_eq!(q.panel_of(3.5), None);
    }

    #[test]
    fn refined_doubles_panels() {
        let q = Quadrature::new(0.0, 1.0, 4, 3, Scheme::GaussLegendre).unwrap();
        let r = q.refined();
        assert_eq!(r.panels(), 6);
        assert_eq!(r.len(), 24);
    }

    #[test]
    fn truncation_exponential_closed_form() {
        let env = Envelope::Exponential { amplitude: 1.0, rate: 1.0, center: 0.0 };
        let r = truncate_interval(&env, (0.0, f64::INFINITY), 1e-8).unwrap();
        assert!((r.truncated.1 - 1e8f64.ln()).abs() < 1e-12);
        assert!((r.truncated.1 - 18.42).abs() < 5e-3);
        assert!(r.tail_mass <= 1e-8 * (1.0 + 1e-12));
    }

    #[test]
    fn truncation_zero_envelope() {
        let r = truncate_interval(&Envelope::Zero, (0.0, f64::INFINITY), 1e-8).unwrap();
        assert_eq!(r.truncated, (0.0, 1.0));
        assert_eq!(r.tail_mass, 0.0);
        let r = truncate_interval(&Envelope::Zero, (-2.0, 5.0), 1e-8).unwrap();
        assert_eq!(r.truncated, (-2.0, 5.0));
    }

    #[test]
    fn truncation_power_law() {
        let env = Envelope::custom(|x: f64| (1.0 + x.abs()).powi(-4));
        let r = truncate_interval(&env, (0.0, f64::INFINITY), 1e-6).unwrap();
        let exact = (3e6f64 / 9.0).cbrt() - 1.0;
        let b = r.truncated.1;
        assert!((b - exact).abs() < 1e-6, "b = {b}, expected {exact}");
        assert!((b - 68.3).abs() < 0.1);
        assert!(r.tail_mass <= 1e-6);
    }

    #[test]
    fn truncation_full_line_splits_tolerance() {
        let env = Envelope::Gaussian { amplitude: 2.0, sigma: 1.5, center: 0.5 };
        let r = truncate_interval(&env, (f64::NEG_INFINITY, f64::INFINITY), 1e-10).unwrap();
        let (a, b) = r.truncated;
        assert!(((0.5 - a) - (b - 0.5)).abs() < 1e-6);
        assert!(r.tail_mass <= 1e-10);
        assert!(env.tail_right(b) <= 0.5e-10 * (1.0 + 1e-9));
    }

    #[test]
    fn truncation_compact_support() {
        let env = Envelope::Compact { amplitude: 3.0, lo: 0.0, hi: 2.0 };
        let r = truncate_interval(&env, (f64::NEG_INFINITY, f64::INFINITY), 1e-8).unwrap();
        assert_eq!(r.truncated, (0.0, 2.0));
        assert_eq!(r.tail_mass, 0.0);
    }

    #[test]
    fn truncation_failure_for_non_integrable() {
        let env = Envelope::custom(|x: f64| 1.0 / (1.0 + x.abs()));
        let err = truncate_interval(&env, (0.0, f64::INFINITY), 1e-6).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }
}
