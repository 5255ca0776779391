//! Smeared Green-function norms `|| 1_X (H - z)^{-1} 1_Y ||` computed from
//! sparse shifted solves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::band::BandLu;
use crate::linalg::dense::CMatrix;
use crate::linalg::sparse::{gmres, CsrMatrix};
use crate::model::{DiscreteHamiltonian, GridSpec};
use crate::scalar::{cone, cx, czero, dotc, norm2, Cx, Real};

/// `z = E + i eps` with `eps > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralShift<T: Real> {
    energy: T,
    eps: T,
}

impl<T: Real> SpectralShift<T> {
    pub fn new(energy: T, eps: T) -> Result<Self> {
        if !(eps > T::zero()) || !eps.is_finite() || !energy.is_finite() {
            return Err(Error::NonPositiveEps(eps.as_f64()));
        }
        Ok(Self { energy, eps })
    }

    pub fn energy(&self) -> T {
        self.energy
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn z(&self) -> Cx<T> {
        cx(self.energy, self.eps)
    }
}

/// Grid points of a ball or shell around a continuum center.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet<T: Real> {
    pub center: Vec<T>,
    /// Open inner radius; `None` for a full ball.
    pub inner: Option<T>,
    pub radius: T,
    /// Grid indices, ascending.
    pub indices: Vec<usize>,
}

impl<T: Real> IndicatorSet<T> {
    /// `{q : |q - center| < radius}`.
    pub fn ball(grid: &GridSpec<T>, center: &[T], radius: T) -> Self {
        Self {
            center: center.to_vec(),
            inner: None,
            radius,
            indices: grid.points_in_ball(center, radius),
        }
    }

    /// `{q : inner < |q - center| < outer}`.
    pub fn shell(grid: &GridSpec<T>, center: &[T], inner: T, outer: T) -> Self {
        Self {
            center: center.to_vec(),
            inner: Some(inner),
            radius: outer,
            indices: grid.points_in_shell(center, inner, outer),
        }
    }

    /// Explicit grid indices (e.g. the full domain).
    pub fn from_indices(center: Vec<T>, radius: T, mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self {
            center,
            inner: None,
            radius,
            indices,
        }
    }

    /// Every active site of `h`.
    pub fn whole_domain(h: &DiscreteHamiltonian<T>) -> Self {
        Self::from_indices(Vec::new(), T::infinity(), h.active_sites().to_vec())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Local indices into `h`; every point must be active.
    pub fn local_indices(&self, h: &DiscreteHamiltonian<T>) -> Result<Vec<usize>> {
        if self.indices.is_empty() {
            return Err(Error::EmptySet);
        }
        self.indices
            .iter()
            .map(|&g| {
                h.local_index(g).ok_or_else(|| {
                    Error::PointOutsideDomain(h.grid().coords(g).iter().map(|c| c.as_f64()).collect())
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    /// Direct band factorization unless its estimated work exceeds the cap.
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T: Real> {
    /// Relative residual target `||(H - z) u - b|| <= tol ||b||`.
    pub tol: T,
    pub method: SolverMethod,
    /// Largest `n * kl * (kl + ku)` handled by the direct path under `Auto`.
    pub direct_work_cap: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            method: SolverMethod::Auto,
            direct_work_cap: 4e10,
            gmres_restart: 80,
            gmres_max_iter: 20_000,
        }
    }
}

enum Backend<T: Real> {
    Direct(BandLu<T>),
    Iterative,
}

/// Solver for `(H - z) u = b`, prepared once per shift and shared across
/// right-hand sides.
pub struct ShiftedSolver<'a, T: Real> {
    matrix: &'a CsrMatrix<T>,
    z: Cx<T>,
    opts: SolverOptions<T>,
    backend: Backend<T>,
}

impl<'a, T: Real> ShiftedSolver<'a, T> {
    pub fn new(h: &'a DiscreteHamiltonian<T>, z: Cx<T>, opts: SolverOptions<T>) -> Result<Self> {
        Self::for_matrix(h.matrix(), z, opts)
    }

    pub fn for_matrix(matrix: &'a CsrMatrix<T>, z: Cx<T>, opts: SolverOptions<T>) -> Result<Self> {
        let (kl, ku) = matrix.bandwidths();
        let work = matrix.dim() as f64 * kl as f64 * (kl + ku) as f64;
        let direct = match opts.method {
            SolverMethod::Direct => true,
            SolverMethod::Iterative => false,
            SolverMethod::Auto => work <= opts.direct_work_cap,
        };
        let backend = if direct {
            Backend::Direct(BandLu::factor(matrix, z)?)
        } else {
            Backend::Iterative
        };
        Ok(Self {
            matrix,
            z,
            opts,
            backend,
        })
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.backend, Backend::Direct(_))
    }

    fn residual(&self, u: &[Cx<T>], b: &[Cx<T>]) -> Vec<Cx<T>> {
        let mut r = self.matrix.matvec(u);
        for ((ri, ui), bi) in r.iter_mut().zip(u).zip(b) {
            *ri = *bi - (*ri - self.z * ui);
        }
        r
    }

    pub fn solve(&self, rhs: &[Cx<T>]) -> Result<Vec<Cx<T>>> {
        if rhs.len() != self.matrix.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.matrix.dim(),
                found: rhs.len(),
            });
        }
        match &self.backend {
            Backend::Direct(lu) => {
                let mut u = rhs.to_vec();
                lu.solve_in_place(&mut u);
                let bnorm = norm2(rhs);
                // up to two refinement steps if the residual misses the target
                for _ in 0..2 {
                    let r = self.residual(&u, rhs);
                    if norm2(&r) <= self.opts.tol * bnorm {
                        break;
                    }
                    let mut du = r;
                    lu.solve_in_place(&mut du);
                    for (ui, di) in u.iter_mut().zip(&du) {
                        *ui += di;
                    }
                }
                Ok(u)
            }
            Backend::Iterative => gmres(
                self.matrix,
                self.z,
                rhs,
                self.opts.tol,
                self.opts.gmres_restart,
                self.opts.gmres_max_iter,
            ),
        }
    }

    /// `(H - z)^{-1} e_k`.
    pub fn column(&self, k: usize) -> Result<Vec<Cx<T>>> {
        let mut e = vec![czero(); self.matrix.dim()];
        e[k] = cone();
        self.solve(&e)
    }
}

/// Solves `(H - z) u = rhs` once.
pub fn solve_shifted<T: Real>(
    h: &DiscreteHamiltonian<T>,
    z: SpectralShift<T>,
    rhs: &[Cx<T>],
    opts: SolverOptions<T>,
) -> Result<Vec<Cx<T>>> {
    ShiftedSolver::new(h, z.z(), opts)?.solve(rhs)
}

/// Columns of `(H - z)^{-1}` restricted to `rows`, one per entry of `cols`.
///
/// Uses `R(conj z) = R(z)†` so the number of solves is `min(|rows|, |cols|)`.
fn block_gram_factor<T: Real>(
    h: &DiscreteHamiltonian<T>,
    z: Cx<T>,
    rows: &[usize],
    cols: &[usize],
    opts: SolverOptions<T>,
) -> Result<CMatrix<T>> {
    if cols.len() <= rows.len() {
        let solver = ShiftedSolver::new(h, z, opts)?;
        let mut m = CMatrix::zeros(rows.len(), cols.len());
        for (j, &c) in cols.iter().enumerate() {
            let u = solver.column(c)?;
            for (i, &r) in rows.iter().enumerate() {
                m[(i, j)] = u[r];
            }
        }
        Ok(m)
    } else {
        let solver = ShiftedSolver::new(h, z.conj(), opts)?;
        let mut m = CMatrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            let w = solver.column(r)?;
            for (j, &c) in cols.iter().enumerate() {
                m[(i, j)] = w[c].conj();
            }
        }
        Ok(m)
    }
}

/// Dense `|X| x |Y|` block of `(H - z)^{-1}` from sparse solves.
pub fn resolvent_block<T: Real>(
    h: &DiscreteHamiltonian<T>,
    z: SpectralShift<T>,
    x: &IndicatorSet<T>,
    y: &IndicatorSet<T>,
    opts: SolverOptions<T>,
) -> Result<CMatrix<T>> {
    let rows = x.local_indices(h)?;
    let cols = y.local_indices(h)?;
    block_gram_factor(h, z.z(), &rows, &cols, opts)
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
/// iteration from the normalized all-ones vector.
///
/// The iteration is accelerated by repeated squaring of the trace-normalized
/// matrix before the final Rayleigh-quotient sweeps; a start vector with no
/// weight on the top eigenspace is rotated through the unit vectors.
pub fn psd_top_eigenvalue<T: Real>(g: &CMatrix<T>) -> T {
    let k = g.rows();
    if k == 0 {
        return T::zero();
    }
    if k == 1 {
        return g[(0, 0)].re.max(T::zero());
    }
    let trace: T = (0..k).map(|i| g[(i, i)].re).sum();
    if !(trace > T::zero()) {
        return T::zero();
    }
    let scale = |m: &mut CMatrix<T>| {
        let t: T = (0..k).map(|i| m[(i, i)].re).sum();
        let inv = cx(T::one() / t, T::zero());
        CMatrix::from_fn(k, k, |i, j| m[(i, j)] * inv)
    };
    let mut p = scale(&mut g.clone());
    for _ in 0..64 {
        let mut sq = p.matmul(&p);
        let next = scale(&mut sq);
        let diff = CMatrix::from_fn(k, k, |i, j| next[(i, j)] - p[(i, j)]).frobenius_norm();
        p = next;
        if diff <= T::lit(1e-13) {
            break;
        }
    }
    let inv_sqrt_k = T::one() / T::from_usize_lossy(k).sqrt();
    let mut starts = std::iter::once(vec![cx(inv_sqrt_k, T::zero()); k]).chain((0..k).map(|j| {
        let mut e = vec![czero::<T>(); k];
        e[j] = cone();
        e
    }));
    let mut v = loop {
        match starts.next() {
            Some(s) => {
                let w = p.matvec(&s);
                if norm2(&w) > T::lit(1e-6) * norm2(&s) {
                    break w;
                }
            }
            None => return T::zero(),
        }
    };
    let mut lambda = T::zero();
    for _ in 0..100 {
        let nv = norm2(&v);
        v.iter_mut().for_each(|c| *c = *c / nv);
        let gv = g.matvec(&v);
        let next = dotc(&v, &gv).re;
        let converged = (next - lambda).abs() <= T::lit(1e-15) * next.abs();
        lambda = next;
        v = gv;
        if converged {
            break;
        }
    }
    lambda.max(T::zero())
}

/// Largest singular value via power iteration on the smaller Gram matrix.
///
/// The block is scaled by its largest entry first so that the Gram matrix of
/// exponentially small blocks does not underflow.
pub fn spectral_norm<T: Real>(m: &CMatrix<T>) -> T {
    let amax = m.max_abs();
    if !(amax > T::zero()) {
        return T::zero();
    }
    let inv = cx(T::one() / amax, T::zero());
    let m = CMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] * inv);
    let gram = if m.cols() <= m.rows() {
        m.adjoint().matmul(&m)
    } else {
        m.matmul(&m.adjoint())
    };
    psd_top_eigenvalue(&gram).sqrt() * amax
}

/// `|| 1_X (H - z)^{-1} 1_Y ||`.
pub fn block_operator_norm<T: Real>(
    h: &DiscreteHamiltonian<T>,
    z: SpectralShift<T>,
    x: &IndicatorSet<T>,
    y: &IndicatorSet<T>,
    opts: SolverOptions<T>,
) -> Result<T> {
    Ok(spectral_norm(&resolvent_block(h, z, x, y, opts)?))
}

/// Block norms `|| 1_X R(z) 1_{Y_k} ||` for several targets sharing one source
/// set; the resolvent columns on `X` are computed once.
pub fn block_norms_from_source<T: Real>(
    h: &DiscreteHamiltonian<T>,
    z: SpectralShift<T>,
    x: &IndicatorSet<T>,
    targets: &[IndicatorSet<T>],
    opts: SolverOptions<T>,
) -> Result<Vec<T>> {
    let rows = x.local_indices(h)?;
    let solver = ShiftedSolver::new(h, z.z().conj(), opts)?;
    let columns: Vec<Vec<Cx<T>>> = rows.iter().map(|&r| solver.column(r)).collect::<Result<_>>()?;
    targets
        .iter()
        .map(|y| {
            let cols = y.local_indices(h)?;
            let m = CMatrix::from_fn(rows.len(), cols.len(), |i, j| columns[i][cols[j]].conj());
            Ok(spectral_norm(&m))
        })
        .collect()
}

/// Default boundary-layer depth in units of the bump radius.
pub const DEFAULT_LAYER_DEPTH: f64 = 23.0;

/// `{q : r < dist(q, B^c) < depth}` for the ball `B = B(center, L)`, i.e.
/// `L - depth < |q - center| < L - r`. Requires `L > depth + r`.
pub fn boundary_layer_indices<T: Real>(
    grid: &GridSpec<T>,
    center: &[T],
    l: T,
    r: T,
    depth: T,
) -> Result<IndicatorSet<T>> {
    let min = depth + r;
    if !(l > min) {
        return Err(Error::DomainTooSmall {
            l: l.as_f64(),
            min: min.as_f64(),
        });
    }
    Ok(IndicatorSet::shell(grid, center, l - depth, l - r))
}

/// `|| 1_{B(center, r)} (H - z)^{-1} 1_{layer} ||` for `H` restricted to the
/// ball of radius `L`.
pub fn boundary_green_norm<T: Real>(
    h_ball: &DiscreteHamiltonian<T>,
    z: SpectralShift<T>,
    center: &[T],
    l: T,
    r: T,
    depth: T,
    opts: SolverOptions<T>,
) -> Result<T> {
    let layer = boundary_layer_indices(h_ball.grid(), center, l, r, depth)?;
    let source = IndicatorSet::ball(h_ball.grid(), center, r);
    block_operator_norm(h_ball, z, &source, &layer, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{largest_singular_value, DenseLu};
    use crate::model::{assemble_h0, BackgroundFields};

    fn disordered_chain(n: usize, seed: u64) -> DiscreteHamiltonian<f64> {
        let mut s = seed | 1;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let diag: Vec<f64> = (0..n).map(|_| 2.0 + 4.0 * next()).collect();
        DiscreteHamiltonian::chain(&diag, &vec![-1.0; n - 1]).unwrap()
    }

    fn dense_inverse(h: &DiscreteHamiltonian<f64>, z: Cx<f64>) -> CMatrix<f64> {
        DenseLu::new(&h.matrix().to_dense().shifted(z)).unwrap().inverse()
    }

    #[test]
    fn shift_requires_positive_eps() {
        assert!(SpectralShift::new(0.0, 0.0).is_err());
        assert!(SpectralShift::new(0.0, -1.0).is_err());
        assert!(SpectralShift::new(1.0, 1e-12).is_ok());
    }

    #[test]
    fn scalar_and_identity_solves() {
        let h = DiscreteHamiltonian::<f64>::chain(&[3.0], &[]).unwrap();
        let z = SpectralShift::new(1.0, 0.5).unwrap();
        let u = solve_shifted(&h, z, &[cx(1.0, 0.0)], SolverOptions::default()).unwrap();
        assert!((u[0] - cx(1.0, 0.0) / cx(2.0, -0.5)).norm() < 1e-15);

        let id = DiscreteHamiltonian::chain(&[1.0; 4], &[0.0; 3]).unwrap();
        let rhs: Vec<_> = (0..4).map(|i| cx(i as f64, 1.0)).collect();
        let u = solve_shifted(&id, SpectralShift::new(0.0, 1.0).unwrap(), &rhs, SolverOptions::default()).unwrap();
        for (a, b) in u.iter().zip(&rhs) {
            assert!((a - b / cx(1.0, -1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn fifty_point_solve_matches_dense_inverse() {
        let h = disordered_chain(50, 5);
        let z = SpectralShift::new(3.3, 1e-3).unwrap();
        let rhs: Vec<_> = (0..50).map(|i| cx((i as f64).cos(), 0.2)).collect();
        let u = solve_shifted(&h, z, &rhs, SolverOptions::default()).unwrap();
        let v = dense_inverse(&h, z.z()).matvec(&rhs);
        let err = norm2(&u.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err <= 1e-8 * norm2(&v));
    }

    #[test]
    fn iterative_path_agrees_at_moderate_eps() {
        let h = disordered_chain(60, 8);
        let z = SpectralShift::new(1.0, 0.5).unwrap();
        let rhs: Vec<_> = (0..60).map(|i| cx(1.0, i as f64 * 0.01)).collect();
        let direct = solve_shifted(&h, z, &rhs, SolverOptions::default()).unwrap();
        let opts = SolverOptions {
            method: SolverMethod::Iterative,
            ..SolverOptions::default()
        };
        let iter = solve_shifted(&h, z, &rhs, opts).unwrap();
        for (a, b) in direct.iter().zip(&iter) {
            assert!((a - b).norm() < 1e-8 * a.norm().max(1e-3));
        }
    }

    #[test]
    fn one_by_one_block_norm() {
        let h = DiscreteHamiltonian::<f64>::chain(&[2.0], &[]).unwrap();
        let z = SpectralShift::new(0.5, 0.25).unwrap();
        let all = IndicatorSet::whole_domain(&h);
        let n = block_operator_norm(&h, z, &all, &all, SolverOptions::default()).unwrap();
        assert!((n - 1.0 / cx(1.5, -0.25).norm()).abs() < 1e-15);
    }

    #[test]
    fn eighty_point_disjoint_blocks_match_dense_svd() {
        let g = GridSpec::<f64>::new(vec![20.25], 0.25).unwrap();
        let mut h0 = assemble_h0(&g, &BackgroundFields::free()).unwrap();
        let pot: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 13) as f64).collect();
        h0 = crate::model::assemble_hamiltonian(&h0, &pot, 1.5).unwrap();
        assert_eq!(h0.dim(), 80);
        let x = IndicatorSet::ball(&g, &[4.0], 1.0);
        let y = IndicatorSet::ball(&g, &[12.0], 2.0);
        let z = SpectralShift::new(20.0, 1e-4).unwrap();
        let sparse = block_operator_norm(&h0, z, &x, &y, SolverOptions::default()).unwrap();
        let inv = dense_inverse(&h0, z.z());
        let rows = x.local_indices(&h0).unwrap();
        let cols = y.local_indices(&h0).unwrap();
        let dense = largest_singular_value(&inv.select(&rows, &cols)).unwrap();
        assert!((sparse - dense).abs() <= 1e-8 * dense);
        let swapped = block_operator_norm(&h0, z, &y, &x, SolverOptions::default()).unwrap();
        assert!((sparse - swapped).abs() <= 1e-10 * sparse);
    }

    #[test]
    fn adjoint_symmetry_with_magnetic_field() {
        let g = GridSpec::<f64>::new(vec![3.0, 3.0], 0.5).unwrap();
        let bg = BackgroundFields::free().uniform_magnetic_field(1.3, vec![1.5, 1.5]);
        let h = assemble_h0(&g, &bg).unwrap();
        let x = IndicatorSet::ball(&g, &[1.0, 1.0], 0.8);
        let y = IndicatorSet::ball(&g, &[2.0, 2.0], 0.8);
        let z = SpectralShift::new(4.0, 0.3).unwrap();
        let a = block_operator_norm(&h, z, &x, &y, SolverOptions::default()).unwrap();
        // R(z)† = R(conj z): the (Y, X) block at conj z is the adjoint of the (X, Y) block at z
        let inv_conj = DenseLu::new(&h.matrix().to_dense().shifted(z.z().conj())).unwrap().inverse();
        let b = largest_singular_value(&inv_conj.select(&y.local_indices(&h).unwrap(), &x.local_indices(&h).unwrap())).unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn resolvent_bound_and_monotone_blocks() {
        let h = disordered_chain(40, 2);
        let g = h.grid().clone();
        for &eps in &[1e-3, 0.1, 10.0, 1e3] {
            let z = SpectralShift::new(3.0, eps).unwrap();
            let x = IndicatorSet::ball(&g, &[10.0], 2.0);
            let y = IndicatorSet::ball(&g, &[20.0], 2.0);
            let y_big = IndicatorSet::ball(&g, &[20.0], 5.0);
            let a = block_operator_norm(&h, z, &x, &y, SolverOptions::default()).unwrap();
            let b = block_operator_norm(&h, z, &x, &y_big, SolverOptions::default()).unwrap();
            assert!(a <= 1.0 / eps * (1.0 + 1e-12));
            assert!(b >= a * (1.0 - 1e-12));
        }
    }

    #[test]
    fn power_iteration_handles_degenerate_top() {
        let g = CMatrix::diagonal(&[cx(2.0f64, 0.0), cx(2.0, 0.0), cx(1.0, 0.0)]);
        assert!((psd_top_eigenvalue(&g) - 2.0).abs() < 1e-14);
        // all-ones start orthogonal to the top eigenvector
        let orth = CMatrix::<f64>::from_real(2, 2, &[1.5, -0.5, -0.5, 1.5]);
        assert!((psd_top_eigenvalue(&orth) - 2.0).abs() < 1e-14);
        let near = CMatrix::diagonal(&[cx(1.0f64, 0.0), cx(1.0 - 1e-9, 0.0)]);
        assert!((psd_top_eigenvalue(&near) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_layer_one_dimension() {
        let g = GridSpec::<f64>::new(vec![60.0], 0.25).unwrap();
        let layer = boundary_layer_indices(&g, &[30.0], 30.0, 1.0, 23.0).unwrap();
        for i in 0..g.len() {
            let q = g.coords(i)[0];
            let d = (q - 30.0).abs();
            assert_eq!(layer.indices.contains(&i), d > 7.0 && d < 29.0, "q={q}");
        }
        let thin = boundary_layer_indices(&g, &[30.0], 24.25, 1.0, 23.0).unwrap();
        assert!(!thin.is_empty());
        assert!(matches!(
            boundary_layer_indices(&g, &[30.0], 24.0, 1.0, 23.0),
            Err(Error::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn boundary_layer_two_dimensions_brute_force() {
        let g = GridSpec::<f64>::new(vec![54.0, 54.0], 0.5).unwrap();
        let c = [27.0, 27.0];
        let layer = boundary_layer_indices(&g, &c, 26.0, 1.0, 23.0).unwrap();
        let mut count = 0;
        for i in 0..g.len() {
            let q = g.coords(i);
            let d = ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2)).sqrt();
            // distance to the ball's complement is L - |q - c|
            let to_complement = 26.0 - d;
            let inside = to_complement > 1.0 && to_complement < 23.0;
            assert_eq!(layer.indices.binary_search(&i).is_ok(), inside);
            count += inside as usize;
        }
        assert_eq!(count, layer.len());
    }

    #[test]
    fn boundary_norm_bounded_by_inverse_eps() {
        let g = GridSpec::<f64>::new(vec![60.0], 0.25).unwrap();
        let h0 = assemble_h0(&g, &BackgroundFields::free()).unwrap();
        let ball = crate::model::restrict_dirichlet(&h0, &crate::model::DomainMask::ball(&g, &[30.0], 26.0)).unwrap();
        let z = SpectralShift::new(1.0, 1e3).unwrap();
        let v = boundary_green_norm(&ball, z, &[30.0], 26.0, 1.0, 23.0, SolverOptions::default()).unwrap();
        assert!(v > 0.0 && v <= 1e-3);
    }

    #[test]
    fn tiny_blocks_do_not_underflow() {
        let m = CMatrix::from_fn(3, 2, |i, j| cx(1e-200 * (1 + i + j) as f64, 0.0));
        let scaled = CMatrix::from_fn(3, 2, |i, j| cx((1 + i + j) as f64, 0.0));
        let ratio = spectral_norm(&m) / (1e-200 * spectral_norm(&scaled));
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_set_rejected() {
        let h = disordered_chain(10, 1);
        let empty = IndicatorSet::from_indices(vec![0.0], 1.0, vec![]);
        let all = IndicatorSet::whole_domain(&h);
        let z = SpectralShift::new(0.0, 1.0).unwrap();
        assert_eq!(block_operator_norm(&h, z, &empty, &all, SolverOptions::default()).unwrap_err(), Error::EmptySet);
    }
}
