//! Spectral diagnostics: eigenpairs in an energy window, the eigenfunction
//! correlator, eigenfunction decay rates and the integrated density of states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criterion::{fit_exponential_decay, DistanceLadder, ModifiedDistance};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, inertia_below, BandLu, CMatrix};
use crate::model::{derive_sample_seed, DiscreteHamiltonian, Ensemble};
use crate::moments::{sample_observable, MomentSummary, Workers};
use crate::resolvent::IndicatorSet;
use crate::scalar::{cx, czero, dotc, norm2, Cx, Real};

/// Systems up to this dimension are diagonalized densely.
pub const DENSE_EIGEN_LIMIT: usize = 600;

/// Largest number of eigenpairs resolved by one shift-invert subspace.
const SUBSPACE_BLOCK: usize = 24;

/// Open energy interval `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EigenWindow<T: Real> {
    pub a: T,
    pub b: T,
}

impl<T: Real> EigenWindow<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("eigen window needs finite a < b, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn contains(&self, e: T) -> bool {
        e > self.a && e < self.b
    }

    /// Number of eigenvalues of `h` in the window by inertia counts.
    pub fn count(&self, h: &DiscreteHamiltonian<T>) -> usize {
        let below_b = inertia_below(h.matrix(), self.b);
        let below_a = inertia_below(h.matrix(), self.a);
        below_b.saturating_sub(below_a)
    }
}

/// Eigenpairs of `H` in a window; vectors are indexed by active sites.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairSet<T: Real> {
    pub window: EigenWindow<T>,
    pub values: Vec<T>,
    pub vectors: Vec<Vec<Cx<T>>>,
}

impl<T: Real> EigenPairSet<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max_n ||H psi_n - E_n psi_n||`.
    pub fn max_residual(&self, h: &DiscreteHamiltonian<T>) -> T {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(&e, v)| residual(h, e, v))
            .fold(T::zero(), T::max)
    }

    /// `max_{m != n} |<psi_m, psi_n>|` together with `max_n | ||psi_n|| - 1 |`.
    pub fn orthogonality_defect(&self) -> T {
        let mut worst = T::zero();
        for (i, u) in self.vectors.iter().enumerate() {
            worst = worst.max((norm2(u) - T::one()).abs());
            for w in &self.vectors[i + 1..] {
                worst = worst.max(dotc(u, w).norm());
            }
        }
        worst
    }
}

fn residual<T: Real>(h: &DiscreteHamiltonian<T>, e: T, v: &[Cx<T>]) -> T {
    let hv = h.matrix().matvec(v);
    let r: Vec<Cx<T>> = hv.iter().zip(v).map(|(&a, &b)| a - b * e).collect();
    norm2(&r)
}

fn dense_window<T: Real>(h: &DiscreteHamiltonian<T>, window: EigenWindow<T>) -> Result<(Vec<T>, Vec<Vec<Cx<T>>>)> {
    let eig = hermitian_eigen(&h.matrix().to_dense(), true)?;
    let vecs = eig.vectors.as_ref().expect("requested vectors");
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for (k, &e) in eig.values.iter().enumerate() {
        if window.contains(e) {
            values.push(e);
            vectors.push(vecs.column(k));
        }
    }
    Ok((values, vectors))
}

/// Orthonormalizes `block` in place by two passes of modified Gram-Schmidt;
/// numerically dependent columns are replaced by fresh random vectors.
fn orthonormalize<T: Real>(block: &mut [Vec<Cx<T>>], rng: &mut ChaCha8Rng) {
    for j in 0..block.len() {
        for _attempt in 0..4 {
            let before = norm2(&block[j]);
            for _pass in 0..2 {
                for i in 0..j {
                    let (done, rest) = block.split_at_mut(j);
                    let c = dotc(&done[i], &rest[0]);
                    for (x, &q) in rest[0].iter_mut().zip(&done[i]) {
                        *x -= q * c;
                    }
                }
            }
            let nv = norm2(&block[j]);
            if nv > T::lit(1e-10) * before && nv > T::zero() {
                block[j].iter_mut().for_each(|x| *x = *x / nv);
                break;
            }
            block[j] = random_vector(block[j].len(), rng);
        }
    }
}

fn random_vector<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> Vec<Cx<T>> {
    (0..n)
        .map(|_| cx(T::lit(rng.gen::<f64>() - 0.5), T::lit(rng.gen::<f64>() - 0.5)))
        .collect()
}

/// Ritz pairs of `h` on the span of the orthonormal columns `q`, ascending.
fn rayleigh_ritz<T: Real>(h: &DiscreteHamiltonian<T>, q: &[Vec<Cx<T>>]) -> Result<(Vec<T>, Vec<Vec<Cx<T>>>)> {
    let p = q.len();
    let n = h.dim();
    let hq: Vec<Vec<Cx<T>>> = q.iter().map(|v| h.matrix().matvec(v)).collect();
    let small = CMatrix::from_fn(p, p, |i, j| dotc(&q[i], &hq[j]));
    let half = cx(T::lit(0.5), T::zero());
    let small = CMatrix::from_fn(p, p, |i, j| (small[(i, j)] + small[(j, i)].conj()) * half);
    let eig = hermitian_eigen(&small, true)?;
    let v = eig.vectors.as_ref().expect("requested vectors");
    let ritz = (0..p)
        .map(|k| {
            let mut x = vec![czero(); n];
            for (i, qi) in q.iter().enumerate() {
                let c = v[(i, k)];
                for (xe, &qe) in x.iter_mut().zip(qi) {
                    *xe += qe * c;
                }
            }
            x
        })
        .collect();
    Ok((eig.values, ritz))
}

/// Shift-invert subspace iteration for the `count` eigenpairs in `[lo, hi)`.
fn subspace_interval<T: Real>(
    h: &DiscreteHamiltonian<T>,
    lo: T,
    hi: T,
    count: usize,
    tol: T,
) -> Result<(Vec<T>, Vec<Vec<Cx<T>>>)> {
    let n = h.dim();
    let p = (count + (count / 2).max(8)).min(n);
    let mut sigma = (lo + hi) / T::lit(2.0);
    let lu = loop {
        match BandLu::factor(h.matrix(), cx(sigma, T::zero())) {
            Ok(lu) => break lu,
            Err(Error::Singular) => sigma += (hi - lo) * T::lit(1e-7),
            Err(e) => return Err(e),
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0fe1 ^ n as u64);
    let mut q: Vec<Vec<Cx<T>>> = (0..p).map(|_| random_vector(n, &mut rng)).collect();
    orthonormalize(&mut q, &mut rng);
    const MAX_ITER: usize = 400;
    for _ in 0..MAX_ITER {
        for v in q.iter_mut() {
            lu.solve_in_place(v);
        }
        orthonormalize(&mut q, &mut rng);
        let (theta, ritz) = rayleigh_ritz(h, &q)?;
        let inside: Vec<usize> = (0..p).filter(|&k| theta[k] >= lo && theta[k] < hi).collect();
        let converged = inside.len() == count
            && inside
                .iter()
                .all(|&k| residual(h, theta[k], &ritz[k]) <= tol);
        if converged {
            let values = inside.iter().map(|&k| theta[k]).collect();
            let vectors = inside.iter().map(|&k| ritz[k].clone()).collect();
            return Ok((values, vectors));
        }
        q = ritz;
    }
    Err(Error::EigenNonConvergence(MAX_ITER))
}

fn iterative_window<T: Real>(
    h: &DiscreteHamiltonian<T>,
    window: EigenWindow<T>,
    tol: T,
) -> Result<(Vec<T>, Vec<Vec<Cx<T>>>)> {
    let below = |x: T| inertia_below(h.matrix(), x);
    let mut stack = vec![(window.a, window.b, 0usize)];
    let mut pieces = Vec::new();
    while let Some((lo, hi, depth)) = stack.pop() {
        let count = below(hi) - below(lo);
        if count == 0 {
            continue;
        }
        if count > SUBSPACE_BLOCK && depth < 48 {
            let mid = (lo + hi) / T::lit(2.0);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
            continue;
        }
        pieces.push(subspace_interval(h, lo, hi, count, tol)?);
    }
    let mut basis: Vec<Vec<Cx<T>>> = pieces.into_iter().flat_map(|(_, vecs)| vecs).collect();
    if basis.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    // nearly degenerate pairs from different sub-windows are re-rotated
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0fe2);
    orthonormalize(&mut basis, &mut rng);
    let (values, vectors) = rayleigh_ritz(h, &basis)?;
    Ok(values
        .into_iter()
        .zip(vectors)
        .filter(|(e, _)| window.contains(*e))
        .unzip())
}

/// All eigenpairs of `h` with eigenvalue in the window.
///
/// Small systems are diagonalized densely; larger ones use shift-invert
/// subspace iteration on sub-windows. The number of pairs found is checked
/// against inertia counts of `h - a` and `h - b`.
pub fn eigensolve_window<T: Real>(h: &DiscreteHamiltonian<T>, window: EigenWindow<T>) -> Result<EigenPairSet<T>> {
    let expected = window.count(h);
    let hnorm = h.matrix().gershgorin_radius().max(T::min_positive_value());
    let (values, vectors) = if expected == 0 {
        (Vec::new(), Vec::new())
    } else if h.dim() <= DENSE_EIGEN_LIMIT {
        dense_window(h, window)?
    } else {
        iterative_window(h, window, T::lit(1e-12) * hnorm)?
    };
    if values.len() != expected {
        return Err(Error::IncompleteWindow {
            found: values.len(),
            expected,
        });
    }
    let set = EigenPairSet {
        window,
        values,
        vectors,
    };
    let worst = set.max_residual(h);
    if worst > T::lit(1e-8) * hnorm {
        return Err(Error::SolverNonConvergence {
            residual: (worst / hnorm).as_f64(),
            iterations: 0,
        });
    }
    Ok(set)
}

fn restricted_norm<T: Real>(v: &[Cx<T>], idx: &[usize]) -> T {
    let part: Vec<Cx<T>> = idx.iter().map(|&i| v[i]).collect();
    norm2(&part)
}

/// `Σ_n ||1_X psi_n|| ||1_Y psi_n||` over the pairs of `set`.
pub fn correlator_from_pairs<T: Real>(set: &EigenPairSet<T>, x_local: &[usize], y_local: &[usize]) -> T {
    set.vectors
        .iter()
        .map(|v| restricted_norm(v, x_local) * restricted_norm(v, y_local))
        .sum()
}

/// The rank-one sum `Σ_{E_n in J} ||1_X psi_n|| ||1_Y psi_n||`.
pub fn eigenfunction_correlator<T: Real>(
    h: &DiscreteHamiltonian<T>,
    window: EigenWindow<T>,
    x: &IndicatorSet<T>,
    y: &IndicatorSet<T>,
) -> Result<T> {
    let set = eigensolve_window(h, window)?;
    Ok(correlator_from_pairs(&set, &x.local_indices(h)?, &y.local_indices(h)?))
}

/// Mean correlator at one ladder rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CorrelatorPoint<T: Real> {
    pub distance: T,
    pub y: Vec<T>,
    #[serde(rename = "N")]
    pub samples: usize,
    pub mean: T,
    pub stderr: T,
}

/// Expected correlator between the source ball and each target ball, with one
/// eigensolve per realization.
pub fn correlator_ladder<T, E>(
    ensemble: &E,
    window: EigenWindow<T>,
    ladder: &DistanceLadder<T>,
    n: usize,
    master_seed: u64,
    workers: &Workers,
) -> Result<Vec<CorrelatorPoint<T>>>
where
    T: Real,
    E: Ensemble<T> + ?Sized,
{
    let h0 = ensemble.realize(derive_sample_seed(master_seed, 0))?;
    let grid = h0.grid().clone();
    let mask = h0.mask();
    let metric = ModifiedDistance::new(&grid, &mask)?;
    let distances: Vec<T> = ladder
        .targets
        .iter()
        .map(|y| metric.distance(&ladder.source, y))
        .collect::<Result<_>>()?;
    let x = IndicatorSet::ball(&grid, &ladder.source, ladder.radius);
    let ys: Vec<_> = ladder
        .targets
        .iter()
        .map(|y| IndicatorSet::ball(&grid, y, ladder.radius))
        .collect();
    let rows = sample_observable(ensemble, n, master_seed, workers, |h| {
        let set = eigensolve_window(h, window)?;
        let xl = x.local_indices(h)?;
        ys.iter()
            .map(|y| Ok(correlator_from_pairs(&set, &xl, &y.local_indices(h)?)))
            .collect::<Result<Vec<T>>>()
    })?;
    Ok((0..ys.len())
        .map(|k| {
            let col: Vec<T> = rows.iter().map(|r| r[k]).collect();
            let sum = MomentSummary::of_values(&col);
            CorrelatorPoint {
                distance: distances[k],
                y: ladder.targets[k].clone(),
                samples: n,
                mean: sum.mean,
                stderr: sum.stderr,
            }
        })
        .collect())
}

/// Relative amplitude below which shell maxima are treated as round-off.
pub const EIGENVECTOR_FLOOR: f64 = 1e-12;

/// Fitted decay of `|psi|` away from its localization centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EigenDecay<T: Real> {
    /// `ν̂ = -slope` of `ln(shell max)` against radius.
    pub nu: T,
    pub r2: T,
    pub center: Vec<T>,
    /// `(radius, max |psi|)` per shell used in the fit.
    pub shells: Vec<(T, T)>,
}

/// Decay rate of an eigenfunction from the maxima of `|psi|` over shells of
/// width `shell_width` around `argmax |psi|` (lowest index on ties).
///
/// Shells in the outer 10% of the available radius are dropped, as are
/// shells whose maximum lies below `EIGENVECTOR_FLOOR · max |psi|`.
pub fn eigenfunction_decay_rate<T: Real>(
    psi: &[Cx<T>],
    h: &DiscreteHamiltonian<T>,
    shell_width: T,
) -> Result<EigenDecay<T>> {
    if psi.len() != h.dim() {
        return Err(Error::ShapeMismatch {
            expected: h.dim(),
            found: psi.len(),
        });
    }
    if !(shell_width > T::zero()) {
        return Err(Error::InvalidArgument("shell width must be positive".into()));
    }
    let mut peak = 0;
    for (i, v) in psi.iter().enumerate() {
        if v.norm() > psi[peak].norm() {
            peak = i;
        }
    }
    let amax = psi[peak].norm();
    if !(amax > T::zero()) {
        return Err(Error::InvalidArgument("zero eigenfunction".into()));
    }
    let center = h.site_coords(peak);
    let radii: Vec<T> = (0..psi.len())
        .map(|i| {
            h.site_coords(i)
                .iter()
                .zip(&center)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt()
        })
        .collect();
    let rmax = radii.iter().copied().fold(T::zero(), T::max);
    let cutoff = T::lit(0.9) * rmax;
    let floor = T::lit(EIGENVECTOR_FLOOR) * amax;
    let mut shells: Vec<Option<(T, T)>> = Vec::new();
    for (i, &rho) in radii.iter().enumerate() {
        if rho > cutoff {
            continue;
        }
        let k = (rho / shell_width).floor().to_usize().unwrap_or(0);
        if shells.len() <= k {
            shells.resize(k + 1, None);
        }
        let val = psi[i].norm();
        match &mut shells[k] {
            Some((r, m)) if val > *m || (val == *m && rho < *r) => {
                *r = rho;
                *m = val;
            }
            Some(_) => {}
            slot @ None => *slot = Some((rho, val)),
        }
    }
    let points: Vec<(T, T)> = shells
        .into_iter()
        .flatten()
        .take_while(|&(_, m)| m >= floor)
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable shells, need 3", points.len())));
    }
    let fit = fit_exponential_decay(&points)?;
    Ok(EigenDecay {
        nu: fit.mu,
        r2: fit.r2,
        center,
        shells: points,
    })
}

/// Decay fit of one window eigenfunction of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WindowDecay<T: Real> {
    pub sample: usize,
    pub energy: T,
    pub decay: EigenDecay<T>,
}

/// [`eigenfunction_decay_rate`] for every window eigenfunction of the first
/// `n` realizations, in sample then energy order.
pub fn window_decay_rates<T, E>(
    ensemble: &E,
    window: EigenWindow<T>,
    shell_width: T,
    n: usize,
    master_seed: u64,
    workers: &Workers,
) -> Result<Vec<WindowDecay<T>>>
where
    T: Real,
    E: Ensemble<T> + ?Sized,
{
    let per_sample = sample_observable(ensemble, n, master_seed, workers, |h| {
        let set = eigensolve_window(h, window)?;
        set.values
            .iter()
            .zip(&set.vectors)
            .map(|(&e, v)| Ok((e, eigenfunction_decay_rate(v, h, shell_width)?)))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_sample
        .into_iter()
        .enumerate()
        .flat_map(|(sample, rows)| {
            rows.into_iter()
                .map(move |(energy, decay)| WindowDecay { sample, energy, decay })
        })
        .collect())
}

/// Monte Carlo estimate of `E[#{eigenvalues below E}] / |Λ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct IdsEstimate<T: Real> {
    #[serde(rename = "E")]
    pub energy: T,
    #[serde(rename = "N")]
    pub samples: usize,
    pub mean_count: T,
    pub volume: T,
    pub ids: T,
    pub stderr: T,
}

pub fn ids_estimate<T, E>(ensemble: &E, energy: T, n: usize, master_seed: u64, workers: &Workers) -> Result<IdsEstimate<T>>
where
    T: Real,
    E: Ensemble<T> + ?Sized,
{
    let counts = sample_observable(ensemble, n, master_seed, workers, |h| {
        Ok((T::from_usize_lossy(inertia_below(h.matrix(), energy)), h.grid().volume()))
    })?;
    let volume = counts[0].1;
    let c: Vec<T> = counts.iter().map(|p| p.0).collect();
    let sum = MomentSummary::of_values(&c);
    Ok(IdsEstimate {
        energy,
        samples: n,
        mean_count: sum.mean,
        volume,
        ids: sum.mean / volume,
        stderr: sum.stderr / volume,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_h0, BackgroundFields, ModelEnsemble, DisorderLaw, GridSpec, SingleSiteProfile};

    fn free_chain(l: f64, h: f64) -> DiscreteHamiltonian<f64> {
        assemble_h0(&GridSpec::new(vec![l], h).unwrap(), &BackgroundFields::free()).unwrap()
    }

    fn laplacian_values(n: usize, h: f64) -> Vec<f64> {
        (1..=n)
            .map(|k| (2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos()) / (h * h))
            .collect()
    }

    fn disordered(l: f64, lambda: f64, seed: u64) -> DiscreteHamiltonian<f64> {
        let g = GridSpec::new(vec![l], 0.25).unwrap();
        let law = DisorderLaw::uniform_on(&g, lambda).unwrap();
        let ens = ModelEnsemble::new(g, &BackgroundFields::free(), SingleSiteProfile::indicator(1.0), law).unwrap();
        ens.realize(seed).unwrap()
    }

    #[test]
    fn window_below_spectrum_is_empty() {
        let h = free_chain(10.0, 0.5);
        let set = eigensolve_window(&h, EigenWindow::new(-5.0, -1.0).unwrap()).unwrap();
        assert!(set.is_empty());
        let x = IndicatorSet::whole_domain(&h);
        assert_eq!(eigenfunction_correlator(&h, EigenWindow::new(-5.0, -1.0).unwrap(), &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn full_window_is_complete() {
        let h = free_chain(10.0, 0.5);
        let n = h.dim();
        let set = eigensolve_window(&h, EigenWindow::new(-1.0, 100.0).unwrap()).unwrap();
        assert_eq!(set.len(), n);
        assert!(set.orthogonality_defect() < 1e-10);
        let x = IndicatorSet::whole_domain(&h);
        let c = eigenfunction_correlator(&h, EigenWindow::new(-1.0, 100.0).unwrap(), &x, &x).unwrap();
        assert!((c - n as f64).abs() < 1e-10);
    }

    #[test]
    fn free_laplacian_closed_form() {
        let h = free_chain(16.0, 0.5);
        let exact = laplacian_values(h.dim(), 0.5);
        let set = eigensolve_window(&h, EigenWindow::new(0.0, 4.0 / 0.25).unwrap()).unwrap();
        assert_eq!(set.len(), exact.len());
        for (a, b) in set.values.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn iterative_path_matches_dense() {
        let h = disordered(200.0, 3.0, 5);
        assert!(h.dim() > DENSE_EIGEN_LIMIT);
        let w = EigenWindow::new(2.0, 5.0).unwrap();
        let set = eigensolve_window(&h, w).unwrap();
        assert!(set.len() > SUBSPACE_BLOCK, "{}", set.len());
        assert!(set.orthogonality_defect() < 1e-10);
        let (dense_vals, _) = dense_window(&h, w).unwrap();
        assert_eq!(dense_vals.len(), set.len());
        for (a, b) in set.values.iter().zip(&dense_vals) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn correlator_matches_dense_evaluation_and_is_symmetric() {
        let h = disordered(16.0, 4.0, 2);
        let g = h.grid().clone();
        let w = EigenWindow::new(0.0, 20.0).unwrap();
        let x = IndicatorSet::ball(&g, &[4.0], 1.0);
        let y = IndicatorSet::ball(&g, &[10.0], 1.0);
        let c = eigenfunction_correlator(&h, w, &x, &y).unwrap();
        let swapped = eigenfunction_correlator(&h, w, &y, &x).unwrap();
        assert_eq!(c, swapped);
        let eig = hermitian_eigen(&h.matrix().to_dense(), true).unwrap();
        let vecs = eig.vectors.unwrap();
        let xl = x.local_indices(&h).unwrap();
        let yl = y.local_indices(&h).unwrap();
        let mut oracle = 0.0;
        let mut count = 0;
        for (k, &e) in eig.values.iter().enumerate() {
            if e > 0.0 && e < 20.0 {
                count += 1;
                let v = vecs.column(k);
                let nx: f64 = xl.iter().map(|&i| v[i].norm_sqr()).sum::<f64>().sqrt();
                let ny: f64 = yl.iter().map(|&i| v[i].norm_sqr()).sum::<f64>().sqrt();
                oracle += nx * ny;
            }
        }
        assert!((c - oracle).abs() < 1e-10);
        assert!(c <= (count as f64).sqrt() + 1e-12 || c <= count as f64);
    }

    #[test]
    fn synthetic_decay_recovered() {
        let h = free_chain(40.0, 0.25);
        let c = 18.0;
        let psi: Vec<Cx<f64>> = (0..h.dim())
            .map(|i| cx((-0.5 * (h.site_coords(i)[0] - c).abs()).exp(), 0.0))
            .collect();
        let d = eigenfunction_decay_rate(&psi, &h, 1.0).unwrap();
        assert!((d.nu - 0.5).abs() < 0.01, "{}", d.nu);
        assert!(d.r2 > 0.999);
        assert_eq!(d.center, vec![c]);
        let flat = vec![cx(0.1, 0.0); h.dim()];
        let d = eigenfunction_decay_rate(&flat, &h, 1.0).unwrap();
        assert_eq!(d.nu, 0.0);
        assert_eq!(d.center, vec![0.25]);
    }

    #[test]
    fn decay_needs_three_shells() {
        let h = free_chain(2.0, 0.25);
        let psi = vec![cx(1.0, 0.0); h.dim()];
        assert!(eigenfunction_decay_rate(&psi, &h, 1.0).is_err());
    }

    #[test]
    fn ids_limits_and_closed_form() {
        let h = free_chain(20.0, 0.5);
        let w = Workers::serial();
        assert_eq!(ids_estimate(&h, -0.1, 3, 0, &w).unwrap().ids, 0.0);
        let top = ids_estimate(&h, 100.0, 3, 0, &w).unwrap();
        assert_eq!(top.ids, h.dim() as f64 / 20.0);
        let exact = laplacian_values(h.dim(), 0.5);
        for &e in &[0.5, 2.0, 7.0, 15.0] {
            let count = exact.iter().filter(|&&v| v < e).count() as f64;
            assert_eq!(ids_estimate(&h, e, 1, 0, &w).unwrap().mean_count, count);
        }
    }

    #[test]
    fn ids_monotone_in_energy() {
        let g = GridSpec::new(vec![30.0], 0.25).unwrap();
        let law = DisorderLaw::uniform_on(&g, 2.0).unwrap();
        let ens = ModelEnsemble::new(g, &BackgroundFields::free(), SingleSiteProfile::indicator(1.0), law).unwrap();
        let w = Workers::serial();
        let mut prev = -1.0;
        for &e in &[0.0, 1.0, 2.0, 4.0, 8.0] {
            let v = ids_estimate(&ens, e, 20, 3, &w).unwrap().ids;
            assert!(v >= prev);
            prev = v;
        }
    }
}
