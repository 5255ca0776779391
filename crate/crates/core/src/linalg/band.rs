//! Banded factorizations.
//!
//! [`BandLu`] is the direct path beneath every shifted resolvent solve.
//! [`inertia_below`] counts eigenvalues below a real shift through an
//! unpivoted `L D L†` factorization (Sylvester's law of inertia).

use crate::error::{Error, Result};
use crate::linalg::sparse::CsrMatrix;
use crate::scalar::{czero, Cx, Real};

/// `P A = L U` for a band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `i` is stored densely over columns `i - kl ..= i + kl + ku`; the extra
/// `kl` columns hold fill produced by row interchanges.
#[derive(Debug, Clone)]
pub struct BandLu<T: Real> {
    n: usize,
    kl: usize,
    width: usize,
    ab: Vec<Cx<T>>,
    pivots: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    /// Factorizes `A - shift I` where `A` is given in CSR form.
    pub fn factor(a: &CsrMatrix<T>, shift: Cx<T>) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut ab = vec![czero(); n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                ab[i * width + j + kl - i] += v;
            }
            ab[i * width + kl] -= shift;
        }
        let mut lu = Self {
            n,
            kl,
            width,
            ab,
            pivots: vec![0; n],
        };
        lu.eliminate(ku)?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        // j in [i - kl, i + kl + ku]
        i * self.width + j + self.kl - i
    }

    fn eliminate(&mut self, ku: usize) -> Result<()> {
        let (n, kl) = (self.n, self.kl);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.at(k, k)].norm();
            for r in k + 1..=last_row {
                let mag = self.ab[self.at(r, k)].norm();
                if mag > best {
                    best = mag;
                    p = r;
                }
            }
            if best == T::zero() {
                return Err(Error::Singular);
            }
            self.pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (ik, ip) = (self.at(k, c), self.at(p, c));
                    self.ab.swap(ik, ip);
                }
            }
            let pivot = self.ab[self.at(k, k)];
            for r in k + 1..=last_row {
                let idx = self.at(r, k);
                let l = self.ab[idx] / pivot;
                self.ab[idx] = l;
                if l == czero() {
                    continue;
                }
                for c in k + 1..=last_col {
                    let u = self.ab[self.at(k, c)];
                    let dst = self.at(r, c);
                    self.ab[dst] -= l * u;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [Cx<T>]) {
        let (n, kl) = (self.n, self.kl);
        let ku_total = self.width - 1 - kl;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == czero() {
                continue;
            }
            for r in k + 1..=(k + kl).min(n - 1) {
                b[r] -= self.ab[self.at(r, k)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for c in i + 1..=(i + ku_total).min(n - 1) {
                acc -= self.ab[self.at(i, c)] * b[c];
            }
            b[i] = acc / self.ab[self.at(i, i)];
        }
    }
}

/// Number of eigenvalues of the Hermitian matrix `a` strictly below `sigma`.
///
/// Exact zero pivots are nudged by a relative `epsilon` so the count stays
/// defined when `sigma` coincides with an eigenvalue of a leading block.
pub fn inertia_below<T: Real>(a: &CsrMatrix<T>, sigma: T) -> usize {
    let n = a.dim();
    let (b, _) = a.bandwidths();
    let w = b + 1;
    // low[i * w + (i - j)] = entry (i, j), j in [i - b, i]
    let mut low = vec![czero::<T>(); n * w];
    for i in 0..n {
        for (j, v) in a.row(i) {
            if j <= i {
                low[i * w + i - j] += v;
            }
        }
        low[i * w].re -= sigma;
    }
    let tiny = T::epsilon() * a.gershgorin_radius().max(sigma.abs()).max(T::min_positive_value());
    let mut negatives = 0;
    for k in 0..n {
        let mut d = low[k * w].re;
        if d == T::zero() {
            d = tiny;
        }
        if d < T::zero() {
            negatives += 1;
        }
        let last = (k + b).min(n - 1);
        for i in k + 1..=last {
            let lik = low[i * w + i - k] / d;
            if lik == czero() {
                continue;
            }
            for j in k + 1..=i {
                // entry (j, k) = conj(l_jk) d
                let ljk_d = low[j * w + j - k];
                low[i * w + i - j] -= lik * ljk_d.conj();
            }
        }
        for i in k + 1..=last {
            let v = low[i * w + i - k];
            low[i * w + i - k] = v / d;
        }
    }
    negatives
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{hermitian_eigen, CMatrix, DenseLu};
    use crate::scalar::cx;

    fn banded_test_matrix(n: usize, b: usize) -> CsrMatrix<f64> {
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, cx((i as f64 * 0.37).sin() * 3.0, 0.0)));
            for k in 1..=b {
                if i + k < n {
                    let v = cx(-1.0 / k as f64, 0.3 * ((i + k) as f64).cos());
                    trip.push((i, i + k, v));
                    trip.push((i + k, i, v.conj()));
                }
            }
        }
        CsrMatrix::from_triplets(n, trip)
    }

    #[test]
    fn band_lu_matches_dense_lu() {
        let a = banded_test_matrix(30, 3);
        let shift = cx(0.2, 1e-3);
        let lu = BandLu::factor(&a, shift).unwrap();
        let dense = DenseLu::new(&a.to_dense().shifted(shift)).unwrap();
        let rhs: Vec<_> = (0..30).map(|i| cx(i as f64, 1.0)).collect();
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        let y = dense.solve(&rhs);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-10 * b.norm().max(1.0));
        }
    }

    #[test]
    fn band_lu_needs_pivoting() {
        // zero leading diagonal forces an interchange
        let a = CsrMatrix::from_triplets(
            3,
            vec![
                (0, 1, cx(1.0, 0.0)),
                (1, 0, cx(1.0, 0.0)),
                (1, 2, cx(2.0, 0.0)),
                (2, 1, cx(2.0, 0.0)),
                (2, 2, cx(1.0, 0.0)),
            ],
        );
        let lu = BandLu::factor(&a, cx(0.0, 0.0)).unwrap();
        let mut x = vec![cx(1.0, 0.0), cx(2.0, 0.0), cx(3.0, 0.0)];
        lu.solve_in_place(&mut x);
        let back = a.matvec(&x);
        assert!((back[0] - cx(1.0, 0.0)).norm() < 1e-14);
        assert!((back[2] - cx(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn inertia_matches_dense_spectrum() {
        let a = banded_test_matrix(40, 4);
        let eig = hermitian_eigen(&a.to_dense(), false).unwrap();
        for &sigma in &[-5.0, -1.0, 0.0, 0.5, 2.0, 10.0] {
            let expected = eig.values.iter().filter(|&&v| v < sigma).count();
            assert_eq!(inertia_below(&a, sigma), expected, "sigma={sigma}");
        }
        let _ = CMatrix::<f64>::identity(1);
    }
}
