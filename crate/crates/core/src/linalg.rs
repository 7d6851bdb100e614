//! Dense and banded matrix containers and a symmetric eigensolver.
//!
//! The solver reduces a symmetric band matrix to tridiagonal form with
//! Givens rotations (bulge chasing), then diagonalizes the tridiagonal
//! matrix with the implicit QL algorithm. Every plane rotation from both
//! phases is recorded and later replayed onto the eigenvector matrix in
//! column panels. Replaying in panels keeps the active working set in
//! cache, which matters far more than the flop count for the grid sizes
//! used here.

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Largest `|i - j|` over nonzero entries.
    pub fn bandwidth(&self) -> usize {
        let mut b = 0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) != 0.0 {
                    b = b.max(i.abs_diff(j));
                }
            }
        }
        b
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self * other` through the `matrixmultiply` kernel.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        gemm(
            self.rows,
            self.cols,
            other.cols,
            (&self.data, self.cols as isize, 1),
            (&other.data, other.cols as isize, 1),
            &mut out.data,
        );
        out
    }
}

/// `C = A B` for strided `A` (m x k) and `B` (k x n); `C` is row-major m x n.
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], isize, isize),
    b: (&[f64], isize, isize),
    c: &mut [f64],
) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    // SAFETY: the strides describe in-bounds views of `a`, `b` and `c`; the
    // callers construct them from the matrix shapes checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Symmetric band matrix in lower band storage: `band[i * (w + 1) + d] = A[i][i - d]`.
///
/// The stored width `w` may exceed the logical bandwidth to leave room for
/// the bulge created during reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    bandwidth: usize,
    w: usize,
    band: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let w = bandwidth + 1;
        Self { n, bandwidth, w, band: vec![0.0; n * (w + 1)] }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        assert_eq!(m.rows, m.cols);
        let b = m.bandwidth().max(1);
        let mut out = Self::zeros(m.rows, b);
        for i in 0..m.rows {
            for j in i.saturating_sub(b)..=i {
                out.set(i, j, m.get(i, j));
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        if d > self.w {
            0.0
        } else {
            self.band[i * (self.w + 1) + d]
        }
    }

    /// Sets the symmetric pair `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        assert!(d <= self.w, "entry ({i}, {j}) outside stored band");
        self.band[i * (self.w + 1) + d] = v;
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let b = self.bandwidth;
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Similarity transform `A <- G^T A G` for the rotation acting on
    /// the adjacent plane `(p, p + 1)`.
    fn rotate(&mut self, p: usize, c: f64, s: f64) {
        let q = p + 1;
        let lo = p.saturating_sub(self.w);
        let hi = (q + self.w).min(self.n - 1);
        for k in lo..=hi {
            if k == p || k == q {
                continue;
            }
            let apk = self.get(p, k);
            let aqk = self.get(q, k);
            if apk == 0.0 && aqk == 0.0 {
                continue;
            }
            let np = c * apk - s * aqk;
            let nq = s * apk + c * aqk;
            self.set_checked(p, k, np);
            self.set_checked(q, k, nq);
        }
        let app = self.get(p, p);
        let aqq = self.get(q, q);
        let apq = self.get(p, q);
        let new_pp = c * c * app - 2.0 * c * s * apq + s * s * aqq;
        let new_qq = s * s * app + 2.0 * c * s * apq + c * c * aqq;
        let new_pq = c * s * (app - aqq) + (c * c - s * s) * apq;
        self.set(p, p, new_pp);
        self.set(q, q, new_qq);
        self.set(p, q, new_pq);
    }

    #[inline]
    fn set_checked(&mut self, i: usize, j: usize, v: f64) {
        if i.abs_diff(j) <= self.w {
            self.set(i, j, v);
        } else {
            debug_assert!(v.abs() < 1e-300, "fill outside band");
        }
    }
}

/// Plane rotation on rows `(i, i + 1)`: `r_i <- c r_i - s r_{i+1}`, `r_{i+1} <- s r_i + c r_{i+1}`.
#[derive(Debug, Clone, Copy)]
struct Rotation {
    i: u32,
    c: f64,
    s: f64,
}

const PANEL: usize = 32;
const FLUSH_AT: usize = 1 << 16;

/// Eigenvector accumulator in panel layout: panel `k` holds columns
/// `k*PANEL..(k+1)*PANEL` of the transposed eigenvector matrix, row by row.
struct PanelAccumulator {
    n: usize,
    panels: Vec<f64>,
    pending: Vec<Rotation>,
}

impl PanelAccumulator {
    fn identity(n: usize) -> Self {
        let n_panels = n.div_ceil(PANEL);
        let mut panels = vec![0.0; n_panels * n * PANEL];
        for i in 0..n {
            let (k, j) = (i / PANEL, i % PANEL);
            panels[k * n * PANEL + i * PANEL + j] = 1.0;
        }
        Self { n, panels, pending: Vec::with_capacity(FLUSH_AT) }
    }

    #[inline]
    fn push(&mut self, i: usize, c: f64, s: f64) {
        self.pending.push(Rotation { i: i as u32, c, s });
        if self.pending.len() >= FLUSH_AT {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let rots = &self.pending;
        let stride = self.n * PANEL;
        self.panels.par_chunks_mut(stride).for_each(|panel| {
            for r in rots {
                let at = r.i as usize * PANEL;
                let (head, tail) = panel.split_at_mut(at + PANEL);
                let x: &mut [f64; PANEL] = (&mut head[at..]).try_into().unwrap();
                let y: &mut [f64; PANEL] = (&mut tail[..PANEL]).try_into().unwrap();
                rotate_rows(x, y, r.c, r.s);
            }
        });
        self.pending.clear();
    }

    /// Rows of the transposed eigenvector matrix, i.e. eigenvectors, in the given order.
    fn into_rows(mut self, order: &[usize]) -> DenseMatrix {
        self.flush();
        let n = self.n;
        let mut out = DenseMatrix::zeros(n, n);
        out.data.par_chunks_mut(n).zip(order.par_iter()).for_each(|(dst, &src)| {
            for (k, chunk) in dst.chunks_mut(PANEL).enumerate() {
                let base = k * n * PANEL + src * PANEL;
                chunk.copy_from_slice(&self.panels[base..base + chunk.len()]);
            }
        });
        out
    }
}

#[inline]
fn rotate_rows(x: &mut [f64; PANEL], y: &mut [f64; PANEL], c: f64, s: f64) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
            // SAFETY: the required target features were detected at runtime.
            unsafe { rotate_rows_avx2(x, y, c, s) };
            return;
        }
    }
    rotate_rows_generic(x, y, c, s);
}

#[inline(always)]
fn rotate_rows_generic(x: &mut [f64; PANEL], y: &mut [f64; PANEL], c: f64, s: f64) {
    for j in 0..PANEL {
        let a = x[j];
        let b = y[j];
        x[j] = c * a - s * b;
        y[j] = s * a + c * b;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn rotate_rows_avx2(x: &mut [f64; PANEL], y: &mut [f64; PANEL], c: f64, s: f64) {
    rotate_rows_generic(x, y, c, s)
}

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors,
/// stored as rows of `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

const MAX_QL_ITERATIONS: usize = 60;

impl SymmetricEigen {
    pub fn dense(m: &DenseMatrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::InvalidParameter("matrix is not square".into()));
        }
        if !m.is_symmetric() {
            return Err(Error::InvalidParameter("matrix is not symmetric".into()));
        }
        Self::banded(BandMatrix::from_dense(m))
    }

    pub fn banded(mut a: BandMatrix) -> Result<Self> {
        let n = a.dim();
        if n == 0 {
            return Ok(Self { values: vec![], vectors: DenseMatrix::zeros(0, 0) });
        }
        let mut acc = PanelAccumulator::identity(n);
        reduce_to_tridiagonal(&mut a, &mut acc);
        let mut d: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        let mut e: Vec<f64> = (0..n).map(|i| if i + 1 < n { a.get(i + 1, i) } else { 0.0 }).collect();
        tridiagonal_ql(&mut d, &mut e, &mut acc)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
        let values = order.iter().map(|&i| d[i]).collect();
        let vectors = acc.into_rows(&order);
        Ok(Self { values, vectors })
    }
}

/// Band-to-tridiagonal reduction by Givens rotations with bulge chasing.
fn reduce_to_tridiagonal(a: &mut BandMatrix, acc: &mut PanelAccumulator) {
    let n = a.dim();
    let b = a.bandwidth();
    if b <= 1 {
        return;
    }
    for j in 0..n.saturating_sub(2) {
        let top = (j + b).min(n - 1);
        for r in (j + 2..=top).rev() {
            let mut col = j;
            let mut row = r;
            while row < n {
                let lo = a.get(row - 1, col);
                let hi = a.get(row, col);
                if hi == 0.0 {
                    break;
                }
                let rho = lo.hypot(hi);
                let (c, s) = (lo / rho, -hi / rho);
                a.rotate(row - 1, c, s);
                a.set(row, col, 0.0);
                acc.push(row - 1, c, s);
                // the rotation mixes rows/columns row-1 and row, leaving a
                // bulge one band further down in column row-1
                col = row - 1;
                row += b;
            }
        }
    }
}

/// Implicit QL iteration with Wilkinson-type shifts on a symmetric tridiagonal
/// matrix with diagonal `d` and subdiagonal `e` (`e[i]` couples `i` and `i + 1`).
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], acc: &mut PanelAccumulator) -> Result<()> {
    let n = d.len();
    let mut total_iterations = 0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            total_iterations += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NonConvergence { iterations: total_iterations });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                acc.push(i, c, s);
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
