//! Compressed sparse row storage and the restarted GMRES iterative path.

use crate::error::{Error, Result};
use crate::linalg::dense::CMatrix;
use crate::scalar::{czero, dotc, norm2, Cx, Real};

/// Square complex matrix in CSR layout with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T: Real> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Cx<T>>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, Cx<T>)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<Cx<T>> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *vals.last_mut().expect("nonempty") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(m: &CMatrix<T>) -> Self {
        let n = m.rows();
        let trip = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != czero())
            .map(|(i, j)| (i, j, m[(i, j)]))
            .collect();
        Self::from_triplets(n, trip)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Cx<T>)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Cx<T> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => czero(),
        }
    }

    pub fn diagonal(&self) -> Vec<Cx<T>> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut lo, mut hi) = (0, 0);
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                if j < i {
                    lo = lo.max(i - j);
                } else {
                    hi = hi.max(j - i);
                }
            }
        }
        (lo, hi)
    }

    pub fn matvec(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        let mut y = vec![czero(); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[Cx<T>], y: &mut [Cx<T>]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).fold(czero(), |acc, (j, v)| acc + v * x[j]);
        }
    }

    /// Adds `d[i]` to each diagonal entry, inserting structural zeros if needed.
    pub fn add_diagonal(&self, d: &[Cx<T>]) -> Self {
        assert_eq!(d.len(), self.n);
        let mut trip: Vec<_> = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect();
        trip.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        Self::from_triplets(self.n, trip)
    }

    /// Exact Hermitian check: `a_ij == conj(a_ji)` for every stored entry.
    pub fn is_hermitian(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v.conj()))
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == T::zero())
    }

    /// Principal submatrix on `keep` (sorted local indices).
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let trip = keep
            .iter()
            .enumerate()
            .flat_map(|(new_i, &old_i)| {
                let map = &map;
                self.row(old_i)
                    .filter(move |&(j, _)| map[j] != usize::MAX)
                    .map(move |(j, v)| (new_i, map[j], v))
            })
            .collect();
        Self::from_triplets(keep.len(), trip)
    }

    /// Maximum absolute row sum; bounds the spectral radius.
    pub fn gershgorin_radius(&self) -> T {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum of a Hermitian matrix.
    pub fn gershgorin_interval(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..self.n {
            let mut radius = T::zero();
            let mut center = T::zero();
            for (j, v) in self.row(i) {
                if j == i {
                    center = v.re;
                } else {
                    radius += v.norm();
                }
            }
            lo = lo.min(center - radius);
            hi = hi.max(center + radius);
        }
        (lo, hi)
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Restarted GMRES for `(A - shift) x = b`, unpreconditioned.
///
/// Returns the solution once the relative residual drops below `tol`.
pub fn gmres<T: Real>(
    a: &CsrMatrix<T>,
    shift: Cx<T>,
    b: &[Cx<T>],
    tol: T,
    restart: usize,
    max_iter: usize,
) -> Result<Vec<Cx<T>>> {
    let n = a.dim();
    let bnorm = norm2(b);
    let mut x = vec![czero(); n];
    if bnorm == T::zero() {
        return Ok(x);
    }
    let apply = |v: &[Cx<T>]| -> Vec<Cx<T>> {
        let mut y = a.matvec(v);
        for (yi, vi) in y.iter_mut().zip(v) {
            *yi -= shift * vi;
        }
        y
    };
    let m = restart.max(1).min(n.max(1));
    let mut total = 0usize;
    let mut rel = T::one();
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<Cx<T>> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        rel = beta / bnorm;
        if rel <= tol {
            return Ok(x);
        }
        let mut basis: Vec<Vec<Cx<T>>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<Cx<T>>> = Vec::with_capacity(m);
        let mut cs: Vec<T> = Vec::with_capacity(m);
        let mut sn: Vec<Cx<T>> = Vec::with_capacity(m);
        let mut g = vec![czero::<T>(); m + 1];
        g[0] = Cx::new(beta, T::zero());
        let mut k_used = 0;
        for k in 0..m {
            total += 1;
            let mut w = apply(&basis[k]);
            let mut h = vec![czero::<T>(); k + 2];
            for (j, vj) in basis.iter().enumerate() {
                let hj = dotc(vj, &w);
                h[j] = hj;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hj * vi;
                }
            }
            let wnorm = norm2(&w);
            h[k + 1] = Cx::new(wnorm, T::zero());
            for j in 0..k {
                let (c, s) = (cs[j], sn[j]);
                let t = h[j] * c + s * h[j + 1];
                h[j + 1] = h[j + 1] * c - s.conj() * h[j];
                h[j] = t;
            }
            let (a0, b0) = (h[k], h[k + 1]);
            let denom = (a0.norm_sqr() + b0.norm_sqr()).sqrt();
            let (c, s) = if denom == T::zero() {
                (T::one(), czero())
            } else if a0.norm() == T::zero() {
                (T::zero(), b0.conj() / b0.norm())
            } else {
                let c = a0.norm() / denom;
                (c, (a0 / a0.norm()) * b0.conj() / denom)
            };
            h[k] = h[k] * c + s * h[k + 1];
            h[k + 1] = czero();
            g[k + 1] = -s.conj() * g[k];
            g[k] = g[k] * c;
            cs.push(c);
            sn.push(s);
            hess.push(h);
            k_used = k + 1;
            let est = g[k + 1].norm() / bnorm;
            if est <= tol || wnorm == T::zero() || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }
        // back-substitute the triangular system
        let mut y = vec![czero::<T>(); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hess[j][i] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
    let ax = apply(&x);
    let r: Vec<Cx<T>> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let final_rel = norm2(&r) / bnorm;
    if final_rel <= tol {
        return Ok(x);
    }
    Err(Error::SolverNonConvergence {
        residual: final_rel.min(rel).as_f64(),
        iterations: total,
    })
}
