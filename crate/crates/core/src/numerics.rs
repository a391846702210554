//! Dense complex linear algebra.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const C0: Complex64 = Complex64::new(0.0, 0.0);
pub const C1: Complex64 = Complex64::new(1.0, 0.0);
pub const CI: Complex64 = Complex64::new(0.0, 1.0);

/// Default relative tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![C0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C1;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds a matrix from row-major entries, rejecting NaN or infinite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!("{} entries for shape {rows}x{cols}", data.len())));
        }
        if let Some(p) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { row: p / cols, col: p % cols });
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &z) in diag.iter().enumerate() {
            m.data[i * n + i] = z;
        }
        m
    }

    pub fn scalar(z: Complex64) -> Self {
        CMatrix { rows: 1, cols: 1, data: vec![z] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_mut(&mut self, s: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: Complex64, other: &CMatrix) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &CMatrix) {
        for i in 0..block.rows {
            let dst = (r0 + i) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row(i));
        }
    }

    pub fn hstack(blocks: &[&CMatrix]) -> Self {
        let rows = blocks[0].rows;
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut m = Self::zeros(rows, cols);
        let mut c0 = 0;
        for b in blocks {
            assert_eq!(b.rows, rows, "hstack row mismatch");
            m.set_block(0, c0, b);
            c0 += b.cols;
        }
        m
    }

    pub fn vstack(blocks: &[&CMatrix]) -> Self {
        let cols = blocks[0].cols;
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut m = Self::zeros(rows, cols);
        let mut r0 = 0;
        for b in blocks {
            assert_eq!(b.cols, cols, "vstack column mismatch");
            m.set_block(r0, 0, b);
            r0 += b.rows;
        }
        m
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &CMatrix) -> CMatrix {
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = CMatrix::zeros(n, p);
        for i in 0..n {
            let orow = &mut out.data[i * p..(i + 1) * p];
            for k in 0..m {
                let a = self.data[i * m + k];
                if a == C0 {
                    continue;
                }
                let brow = &other.data[k * p..(k + 1) * p];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        self.mul_unchecked(rhs)
    }
}

impl Mul<Complex64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: Complex64) -> CMatrix {
        self.scale(rhs)
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(-C1)
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn new(m: &CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("LU of non-square {}x{}", m.rows, m.cols)));
        }
        let n = m.rows;
        let mut lu = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[k * n + k].norm();
            for i in k + 1..n {
                let v = lu[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            let (top, bottom) = lu.split_at_mut((k + 1) * n);
            let krow = &top[k * n..(k + 1) * n];
            for i in 0..n - k - 1 {
                let row = &mut bottom[i * n..(i + 1) * n];
                let f = row[k] / pivot;
                row[k] = f;
                if f == C0 {
                    continue;
                }
                for j in k + 1..n {
                    row[j] -= f * krow[j];
                }
            }
        }
        Ok(Lu { n, lu, perm, sign, singular })
    }

    pub fn det(&self) -> Complex64 {
        if self.singular {
            return C0;
        }
        let mut d = Complex64::new(self.sign, 0.0);
        for i in 0..self.n {
            d *= self.lu[i * self.n + i];
        }
        d
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Ratio of largest to smallest pivot modulus; a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        let piv: Vec<f64> = (0..self.n).map(|i| self.lu[i * self.n + i].norm()).collect();
        let max = piv.iter().cloned().fold(0.0, f64::max);
        let min = piv.iter().cloned().fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn solve(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if rhs.rows != self.n {
            return Err(Error::Dimension(format!("rhs has {} rows, system has {}", rhs.rows, self.n)));
        }
        if self.singular {
            return Err(Error::Singular("zero pivot in LU".into()));
        }
        let (n, p) = (self.n, rhs.cols);
        let mut x = CMatrix::zeros(n, p);
        for i in 0..n {
            x.data[i * p..(i + 1) * p].copy_from_slice(rhs.row(self.perm[i]));
        }
        for i in 0..n {
            for k in 0..i {
                let f = self.lu[i * n + k];
                if f == C0 {
                    continue;
                }
                for j in 0..p {
                    let t = x.data[k * p + j];
                    x.data[i * p + j] -= f * t;
                }
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let f = self.lu[i * n + k];
                if f == C0 {
                    continue;
                }
                for j in 0..p {
                    let t = x.data[k * p + j];
                    x.data[i * p + j] -= f * t;
                }
            }
            let piv = self.lu[i * n + i];
            for j in 0..p {
                x.data[i * p + j] /= piv;
            }
        }
        Ok(x)
    }
}

pub fn det(m: &CMatrix) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("det of non-square {}x{}", m.rows, m.cols)));
    }
    Ok(Lu::new(m)?.det())
}

pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    Lu::new(a)?.solve(b)
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    Lu::new(m)?.solve(&CMatrix::identity(m.rows))
}

/// `det(I - m) * exp(tr m)`; takes the operator itself, not `I - m`.
pub fn det2_matrix(m: &CMatrix) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("det2 of non-square {}x{}", m.rows, m.cols)));
    }
    let mut a = -m;
    for i in 0..m.rows {
        a[(i, i)] += C1;
    }
    Ok(det(&a)? * m.trace().exp())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermEigen {
    pub values: Vec<f64>,
    /// Columns are the orthonormal eigenvectors.
    pub vectors: CMatrix,
}

pub fn herm_eigs(m: &CMatrix) -> Result<HermEigen> {
    herm_eigs_tol(m, HERMITIAN_TOL)
}

pub fn herm_eigs_tol(m: &CMatrix, tol: f64) -> Result<HermEigen> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("eigenproblem of non-square {}x{}", m.rows, m.cols)));
    }
    let scale = m.norm_fro();
    let defect = m.hermitian_defect();
    if defect > tol * scale.max(f64::MIN_POSITIVE) && defect > 0.0 {
        return Err(Error::Contract(format!("matrix not Hermitian: ‖M − M*‖ = {defect:.3e}")));
    }
    let n = m.rows;
    if scale == 0.0 {
        return Ok(HermEigen { values: vec![0.0; n], vectors: CMatrix::identity(n) });
    }
    let sym = CMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let eig = sym.to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermEigen { values, vectors })
}

/// `Q f(Λ) Q*` for a Hermitian eigen-decomposition.
pub fn herm_apply(e: &HermEigen, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = e.values.len();
    let fv: Vec<f64> = e.values.iter().map(|&l| f(l)).collect();
    CMatrix::from_fn(n, n, |i, j| (0..n).map(|k| e.vectors[(i, k)] * fv[k] * e.vectors[(j, k)].conj()).sum())
}

/// Eigenvalues of a general square matrix (independent check values, not used in core paths).
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("eigenvalues of non-square {}x{}", m.rows, m.cols)));
    }
    let schur = m.to_nalgebra().schur();
    let (_, t) = schur.unpack();
    Ok((0..m.rows).map(|i| t[(i, i)]).collect())
}

/// Factorization `Vx = u v` with `v = |Vx|^{1/2}`.
///
/// Hermitian input gives `u = sign(Vx)|Vx|^{1/2}`; otherwise the singular value
/// decomposition supplies the partial isometry, taken as zero on `ker |Vx|`.
pub fn polar_factor(vx: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if !vx.is_square() {
        return Err(Error::Dimension(format!("polar factor of non-square {}x{}", vx.rows, vx.cols)));
    }
    let n = vx.rows;
    let scale = vx.norm_fro();
    if scale == 0.0 {
        return Ok((CMatrix::zeros(n, n), CMatrix::zeros(n, n)));
    }
    if vx.hermitian_defect() <= HERMITIAN_TOL * scale {
        let e = herm_eigs(vx)?;
        let u = herm_apply(&e, |l| l.signum() * l.abs().sqrt());
        let v = herm_apply(&e, |l| l.abs().sqrt());
        return Ok((u, v));
    }
    let svd = vx.to_nalgebra().svd(true, true);
    let w = svd.u.ok_or_else(|| Error::Singular("SVD did not return U".into()))?;
    let zt = svd.v_t.ok_or_else(|| Error::Singular("SVD did not return V*".into()))?;
    let s: Vec<f64> = svd.singular_values.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let u = CMatrix::from_fn(n, n, |i, j| (0..n).map(|k| w[(i, k)] * s[k] * zt[(k, j)]).sum());
    let v = CMatrix::from_fn(n, n, |i, j| (0..n).map(|k| zt[(k, i)].conj() * s[k] * zt[(k, j)]).sum());
    Ok((u, v))
}

/// Sum of the singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.norm_fro() == 0.0 {
        return 0.0;
    }
    m.to_nalgebra().singular_values().iter().sum()
}

/// `exp(z) - 1` without cancellation for small `|z|`.
pub fn cexpm1(z: Complex64) -> Complex64 {
    if z.norm() > 0.5 {
        return z.exp() - C1;
    }
    let em1 = z.re.exp_m1();
    let half = (0.5 * z.im).sin();
    Complex64::new(em1 * z.im.cos() - 2.0 * half * half, (em1 + 1.0) * z.im.sin())
}
