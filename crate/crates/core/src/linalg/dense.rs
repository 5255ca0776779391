//! Dense complex matrices: LU with partial pivoting and the Hermitian
//! eigensolver (Householder tridiagonalization followed by implicit QL).

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::{cone, czero, cx, norm2, Cx, Real};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = cone();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, values: &[T]) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self {
            rows,
            cols,
            data: values.iter().map(|&v| cx(v, T::zero())).collect(),
        }
    }

    pub fn diagonal(d: &[Cx<T>]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Cx<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Cx<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == czero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Cx<T>]) -> Vec<Cx<T>> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(czero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `self - z I`.
    pub fn shifted(&self, z: Cx<T>) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] -= z;
        }
        m
    }

    /// Submatrix with the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn frobenius_norm(&self) -> T {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|c| c.norm()).fold(T::zero(), T::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..=i).all(|j| self[(i, j)] == self[(j, i)].conj()))
    }

    pub fn as_slice(&self) -> &[Cx<T>] {
        &self.data
    }
}

impl<T: Real> Index<(usize, usize)> for CMatrix<T> {
    type Output = Cx<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cx<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization `P A = L U` with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu<T: Real> {
    lu: CMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub fn new(a: &CMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::ShapeMismatch {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == T::zero() {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                if l == czero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[Cx<T>]) -> Vec<Cx<T>> {
        let n = self.lu.rows();
        let mut x: Vec<Cx<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> CMatrix<T> {
        let n = self.lu.rows();
        let mut inv = CMatrix::zeros(n, n);
        let mut e = vec![czero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|c| *c = czero());
            e[j] = cone();
            let col = self.solve(&e);
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: Real> {
    pub values: Vec<T>,
    /// Column `k` is the normalized eigenvector of `values[k]`.
    pub vectors: Option<CMatrix<T>>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn vector(&self, k: usize) -> Option<Vec<Cx<T>>> {
        self.vectors.as_ref().map(|v| v.column(k))
    }
}

/// Reduces a Hermitian matrix to real symmetric tridiagonal form.
///
/// Returns `(diag, offdiag, Q)` with `A = Q T Q†`, where `offdiag[k]` couples
/// rows `k` and `k + 1` and `Q` already absorbs the phase normalization.
fn tridiagonalize<T: Real>(a: &CMatrix<T>, want_q: bool) -> (Vec<T>, Vec<T>, Option<CMatrix<T>>) {
    let n = a.rows();
    let mut m = a.clone();
    let mut q = want_q.then(|| CMatrix::identity(n));
    let two = T::lit(2.0);

    for k in 0..n.saturating_sub(2) {
        let x: Vec<Cx<T>> = (k + 1..n).map(|i| m[(i, k)]).collect();
        let xnorm = norm2(&x);
        if xnorm == T::zero() {
            continue;
        }
        let phase = if x[0].norm() == T::zero() {
            cone()
        } else {
            x[0] / x[0].norm()
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = norm2(&v);
        if vnorm == T::zero() {
            continue;
        }
        v.iter_mut().for_each(|c| *c = *c / vnorm);

        let len = n - k - 1;
        // p = A22 v over the trailing block
        let mut p = vec![czero(); len];
        for (ii, pi) in p.iter_mut().enumerate() {
            let row = &m.data[(k + 1 + ii) * n + k + 1..(k + 1 + ii) * n + n];
            *pi = row.iter().zip(&v).fold(czero(), |acc, (&a, &b)| acc + a * b);
        }
        let kappa = crate::scalar::dotc(&v, &p).re;
        let w: Vec<Cx<T>> = p.iter().zip(&v).map(|(&pi, &vi)| pi - vi * kappa).collect();
        let vbar: Vec<Cx<T>> = v.iter().map(|c| c.conj() * two).collect();
        let wbar: Vec<Cx<T>> = w.iter().map(|c| c.conj() * two).collect();
        for ii in 0..len {
            let (vi, wi) = (v[ii], w[ii]);
            let start = (k + 1 + ii) * n + k + 1;
            let row = &mut m.data[start..start + len];
            for ((r, &wb), &vb) in row.iter_mut().zip(&wbar).zip(&vbar) {
                *r -= vi * wb + wi * vb;
            }
        }
        m[(k + 1, k)] = alpha;
        m[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            m[(i, k)] = czero();
            m[(k, i)] = czero();
        }
        if let Some(q) = q.as_mut() {
            // Q <- Q (I - 2 v v†)
            for i in 0..n {
                let row = &mut q.data[i * n + k + 1..i * n + n];
                let qv = row.iter().zip(&v).fold(czero(), |acc, (&a, &b)| acc + a * b) * two;
                for (r, &vj) in row.iter_mut().zip(&v) {
                    *r -= qv * vj.conj();
                }
            }
        }
    }

    let diag: Vec<T> = (0..n).map(|i| m[(i, i)].re).collect();
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    let mut phi = vec![cone::<T>(); n];
    for k in 0..n.saturating_sub(1) {
        let c = m[(k + 1, k)];
        let mag = c.norm();
        off.push(mag);
        phi[k + 1] = if mag == T::zero() { phi[k] } else { phi[k] * (c / mag) };
    }
    if let Some(q) = q.as_mut() {
        for i in 0..n {
            for (j, &ph) in phi.iter().enumerate() {
                q[(i, j)] = q[(i, j)] * ph;
            }
        }
    }
    (diag, off, q)
}

/// Implicit QL with Wilkinson shifts on a real symmetric tridiagonal matrix.
///
/// `z`, when given, is `n x n` row-major and is right-multiplied by the
/// accumulated rotations.
pub fn tridiagonal_ql<T: Real>(d: &mut [T], offdiag: &[T], z: Option<&mut [T]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let mut e = vec![T::zero(); n];
    e[..n - 1].copy_from_slice(&offdiag[..n - 1]);
    // rotations act on columns; keep them contiguous
    let mut zt = z.as_deref().map(|z| {
        let mut t = vec![T::zero(); n * n];
        for r in 0..n {
            for c in 0..n {
                t[c * n + r] = z[r * n + c];
            }
        }
        t
    });
    let max_iter = 60;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > max_iter {
                return Err(Error::EigenNonConvergence(max_iter));
            }
            let two = T::lit(2.0);
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + r.abs().copysign(g));
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zt) = zt.as_deref_mut() {
                    let (lo, hi) = zt.split_at_mut((i + 1) * n);
                    let col_i = &mut lo[i * n..];
                    let col_next = &mut hi[..n];
                    for (zi, zn) in col_i.iter_mut().zip(col_next.iter_mut()) {
                        let fz = *zn;
                        *zn = s * *zi + c * fz;
                        *zi = c * *zi - s * fz;
                    }
                }
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    if let (Some(z), Some(zt)) = (z, zt) {
        for r in 0..n {
            for c in 0..n {
                z[r * n + c] = zt[c * n + r];
            }
        }
    }
    Ok(())
}

/// Full eigen-decomposition of a Hermitian matrix.
pub fn hermitian_eigen<T: Real>(a: &CMatrix<T>, want_vectors: bool) -> Result<HermitianEigen<T>> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::ShapeMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    if n == 0 {
        return Ok(HermitianEigen {
            values: vec![],
            vectors: want_vectors.then(|| CMatrix::zeros(0, 0)),
        });
    }
    let (mut d, e, q) = tridiagonalize(a, want_vectors);
    let mut z = want_vectors.then(|| {
        let mut z = vec![T::zero(); n * n];
        for i in 0..n {
            z[i * n + i] = T::one();
        }
        z
    });
    tridiagonal_ql(&mut d, &e, z.as_deref_mut())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let values: Vec<T> = order.iter().map(|&k| d[k]).collect();
    let vectors = match (q, z) {
        (Some(q), Some(z)) => {
            let zt: Vec<Vec<T>> = order.iter().map(|&col| (0..n).map(|k| z[k * n + col]).collect()).collect();
            Some(CMatrix::from_fn(n, n, |i, jj| {
                q.row(i).iter().zip(&zt[jj]).fold(czero(), |acc, (&a, &b)| acc + a * b)
            }))
        }
        _ => None,
    };
    Ok(HermitianEigen { values, vectors })
}

/// Largest singular value of a dense matrix via full eigen-decomposition of
/// the smaller Gram matrix.
pub fn largest_singular_value<T: Real>(m: &CMatrix<T>) -> Result<T> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::EmptySet);
    }
    let gram = if m.cols() <= m.rows() {
        m.adjoint().matmul(m)
    } else {
        m.matmul(&m.adjoint())
    };
    let eig = hermitian_eigen(&gram, false)?;
    Ok(eig.values.last().copied().unwrap_or(T::zero()).max(T::zero()).sqrt())
}
