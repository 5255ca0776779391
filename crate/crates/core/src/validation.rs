//! Independent oracles: dense resolvents for small systems and a numerical
//! bench for the weak 1-1 bound
//! `|{η : ||T (η + A + i0)^{-1} T||_HS > t}| <= (C / t) ||T||_HS^2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, largest_singular_value, CMatrix, DenseLu};
use crate::model::{
    derive_sample_seed, BackgroundFields, CouplingDensity, DiscreteHamiltonian, DisorderLaw, Ensemble, GridSpec,
    ModelEnsemble, SingleSiteProfile,
};
use crate::moments::Workers;
use crate::resolvent::{block_operator_norm, IndicatorSet, SolverOptions, SpectralShift};
use crate::scalar::{cx, Cx, Real};

/// Default dimension cap of the dense oracle.
pub const DENSE_ORACLE_CAP: usize = 500;

/// Relative agreement required between sparse and dense block norms.
pub const ORACLE_TOLERANCE: f64 = 1e-8;

fn identity_defect<T: Real>(a: &CMatrix<T>, r: &CMatrix<T>) -> T {
    let prod = a.matmul(r);
    let n = a.rows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((prod[(i, j)] - cx(target, T::zero())).norm());
        }
    }
    worst
}

/// Dense `(H - z)^{-1}` with `||(H - z) R - I||_max <= 1e-10`.
///
/// The LU inverse is refined by up to two Newton steps `R <- R + R (I - A R)`.
pub fn dense_resolvent_oracle<T: Real>(h: &DiscreteHamiltonian<T>, z: Cx<T>, cap: usize) -> Result<CMatrix<T>> {
    let n = h.dim();
    if n > cap {
        return Err(Error::DenseCapExceeded { dim: n, cap });
    }
    let a = h.matrix().to_dense().shifted(z);
    let lu = DenseLu::new(&a)?;
    let mut r = lu.inverse();
    let limit = T::lit(1e-10);
    let mut defect = identity_defect(&a, &r);
    for _ in 0..2 {
        if defect <= limit {
            break;
        }
        let ar = a.matmul(&r);
        let resid = CMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { cx(T::one(), T::zero()) } else { cx(T::zero(), T::zero()) };
            id - ar[(i, j)]
        });
        let corr = r.matmul(&resid);
        r = CMatrix::from_fn(n, n, |i, j| r[(i, j)] + corr[(i, j)]);
        defect = identity_defect(&a, &r);
    }
    if defect > limit {
        return Err(Error::SolverNonConvergence {
            residual: defect.as_f64(),
            iterations: 2,
        });
    }
    Ok(r)
}

/// Sparse versus dense block norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OracleReport<T: Real> {
    pub sparse: T,
    pub dense: T,
    pub discrepancy: T,
    pub pass: bool,
}

/// Relative difference between the sparse-path norm `||1_X R(z) 1_Y||` and the
/// largest singular value of the same block of the dense inverse.
/// Failures of either path are reported as a failing comparison.
pub fn oracle_compare<T: Real>(
    h: &DiscreteHamiltonian<T>,
    z: SpectralShift<T>,
    x: &IndicatorSet<T>,
    y: &IndicatorSet<T>,
    opts: SolverOptions<T>,
) -> OracleReport<T> {
    let failed = OracleReport {
        sparse: T::nan(),
        dense: T::nan(),
        discrepancy: T::infinity(),
        pass: false,
    };
    let dense = (|| -> Result<T> {
        let r = dense_resolvent_oracle(h, z.z(), DENSE_ORACLE_CAP)?;
        largest_singular_value(&r.select(&x.local_indices(h)?, &y.local_indices(h)?))
    })();
    let sparse = block_operator_norm(h, z, x, y, opts);
    match (sparse, dense) {
        (Ok(sparse), Ok(dense)) => {
            let discrepancy = (sparse - dense).abs() / dense.abs().max(T::min_positive_value());
            OracleReport {
                sparse,
                dense,
                discrepancy,
                pass: discrepancy <= T::lit(ORACLE_TOLERANCE),
            }
        }
        (Ok(sparse), Err(_)) => OracleReport { sparse, ..failed },
        (Err(_), Ok(dense)) => OracleReport { dense, ..failed },
        _ => failed,
    }
}

/// `A = X + iY` with `X` Hermitian and `Y ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipativeOperator<T: Real> {
    x: CMatrix<T>,
    y: CMatrix<T>,
    y_min_eigenvalue: T,
}

impl<T: Real> DissipativeOperator<T> {
    pub fn new(x: CMatrix<T>, y: CMatrix<T>) -> Result<Self> {
        if !x.is_square() || x.rows() != y.rows() || !y.is_square() {
            return Err(Error::ShapeMismatch {
                expected: x.rows(),
                found: y.rows(),
            });
        }
        if !x.is_hermitian() || !y.is_hermitian() {
            return Err(Error::InvalidArgument("X and Y must be Hermitian".into()));
        }
        let y_min_eigenvalue = hermitian_eigen(&y, false)?.values.first().copied().unwrap_or(T::zero());
        if y_min_eigenvalue < T::lit(-1e-12) {
            return Err(Error::InvalidArgument(format!(
                "dissipative part has eigenvalue {y_min_eigenvalue} < 0"
            )));
        }
        Ok(Self {
            x,
            y,
            y_min_eigenvalue,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.rows()
    }

    pub fn hermitian_part(&self) -> &CMatrix<T> {
        &self.x
    }

    pub fn dissipative_part(&self) -> &CMatrix<T> {
        &self.y
    }

    /// `Y` has a numerical kernel (smallest eigenvalue at most `1e-12`).
    pub fn has_kernel(&self) -> bool {
        self.y_min_eigenvalue <= T::lit(1e-12)
    }

    /// `A + i delta` as a dense matrix.
    pub fn regularized(&self, delta: T) -> CMatrix<T> {
        let n = self.dim();
        CMatrix::from_fn(n, n, |i, j| {
            let shift = if i == j { delta } else { T::zero() };
            self.x[(i, j)] + cx(-self.y[(i, j)].im, self.y[(i, j)].re + shift)
        })
    }

    /// Operator-norm bound `||X|| + ||Y||` from Frobenius norms.
    pub fn norm_bound(&self) -> T {
        self.x.frobenius_norm() + self.y.frobenius_norm()
    }
}

/// A Hilbert-Schmidt operator with its norm.
#[derive(Debug, Clone, PartialEq)]
pub struct HSOperator<T: Real> {
    pub t: CMatrix<T>,
    pub hs_norm: T,
}

impl<T: Real> HSOperator<T> {
    pub fn new(t: CMatrix<T>) -> Self {
        let hs_norm = t.frobenius_norm();
        Self { t, hs_norm }
    }
}

/// Uniform `η` grid for the level-set bench.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EtaGrid<T: Real> {
    pub lo: T,
    pub hi: T,
    pub points: usize,
}

/// Default number of `η` samples.
pub const DEFAULT_ETA_POINTS: usize = 100_000;

/// Regularization `δ` replacing `i0` when `Y` has a kernel.
pub const DEFAULT_DELTA: f64 = 1e-8;

impl<T: Real> EtaGrid<T> {
    pub fn new(lo: T, hi: T, points: usize) -> Result<Self> {
        if !(lo < hi) || points < 2 {
            return Err(Error::InvalidArgument("eta grid needs lo < hi and at least 2 points".into()));
        }
        Ok(Self { lo, hi, points })
    }

    /// `[-20, 20] · ||A||` with the default resolution.
    pub fn scaled_to(a: &DissipativeOperator<T>) -> Self {
        let s = T::lit(20.0) * a.norm_bound().max(T::one());
        Self {
            lo: -s,
            hi: s,
            points: DEFAULT_ETA_POINTS,
        }
    }

    pub fn step(&self) -> T {
        (self.hi - self.lo) / T::from_usize_lossy(self.points)
    }

    /// Midpoint of cell `k`.
    pub fn point(&self, k: usize) -> T {
        self.lo + self.step() * (T::from_usize_lossy(k) + T::lit(0.5))
    }
}

/// Level-set measures of `η ↦ ||T (η + A + iδ)^{-1} T||_HS`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Weak11Report<T: Real> {
    pub t: Vec<T>,
    pub measures: Vec<T>,
    pub hs_norm_sq: T,
    pub delta: T,
    pub eta_step: T,
    /// `max_t t · measure(t) / ||T||_HS^2`.
    pub c_fit: T,
    pub monotone: bool,
    /// Fitted slope of `ln measure` against `ln t` over the active decade.
    pub slope: Option<T>,
    pub decade: Option<(T, T)>,
    /// Largest relative change of the measures in the active decade when
    /// `δ` is replaced by `δ / 10`.
    pub delta_sensitivity: Option<T>,
}

/// `||T (η + A)^{-1} T||_HS` for each η of the grid, with `A` already regularized.
fn hs_profile<T: Real>(a: &CMatrix<T>, t: &CMatrix<T>, grid: &EtaGrid<T>, workers: &Workers) -> Result<Vec<T>> {
    let n = a.rows();
    workers
        .map(grid.points, |k| {
            let eta = grid.point(k);
            let shifted = a.shifted(cx(-eta, T::zero()));
            let lu = DenseLu::new(&shifted)?;
            // R T column by column
            let cols: Vec<Vec<Cx<T>>> = (0..n).map(|j| lu.solve(&t.column(j))).collect();
            let rt = CMatrix::from_fn(n, n, |i, j| cols[j][i]);
            Ok(t.matmul(&rt).frobenius_norm())
        })
        .into_iter()
        .collect()
}

fn measures_for<T: Real>(profile: &[T], t_grid: &[T], step: T) -> Vec<T> {
    t_grid
        .iter()
        .map(|&t| T::from_usize_lossy(profile.iter().filter(|&&v| v > t).count()) * step)
        .collect()
}

/// Smallest level-set width, in grid steps, counted as resolved.
const RESOLVED_STEPS: f64 = 100.0;

/// Indices of the active decade `[t*/10, t*]`, where `t*` is the largest `t`
/// whose level set spans at least `RESOLVED_STEPS` grid cells.
fn active_decade<T: Real>(t_grid: &[T], measures: &[T], step: T) -> Option<Vec<usize>> {
    let resolved = T::lit(RESOLVED_STEPS) * step;
    let top = (0..t_grid.len()).rev().find(|&k| measures[k] >= resolved)?;
    let lo = t_grid[top] / T::lit(10.0);
    let idx: Vec<usize> = (0..=top).filter(|&k| t_grid[k] >= lo && measures[k] > T::zero()).collect();
    (idx.len() >= 3).then_some(idx)
}

fn loglog_slope<T: Real>(t: &[T], m: &[T]) -> T {
    let xs: Vec<T> = t.iter().map(|v| v.ln()).collect();
    let ys: Vec<T> = m.iter().map(|v| v.ln()).collect();
    let nf = T::from_usize_lossy(xs.len());
    let xm = xs.iter().copied().sum::<T>() / nf;
    let ym = ys.iter().copied().sum::<T>() / nf;
    let sxy: T = xs.iter().zip(&ys).map(|(&x, &y)| (x - xm) * (y - ym)).sum();
    let sxx: T = xs.iter().map(|&x| (x - xm) * (x - xm)).sum();
    sxy / sxx
}

/// Riemann-sum measures of `{η : ||T (η + A + iδ)^{-1} T||_HS > t}` for each `t`.
///
/// `δ` is added only when `Y` has a kernel; the sensitivity to `δ` is then
/// reported by repeating the sweep with `δ / 10`.
pub fn weak11_levelset_measure<T: Real>(
    a: &DissipativeOperator<T>,
    t_op: &HSOperator<T>,
    t_grid: &[T],
    eta: &EtaGrid<T>,
    workers: &Workers,
) -> Result<Weak11Report<T>> {
    if t_op.t.rows() != a.dim() || !t_op.t.is_square() {
        return Err(Error::ShapeMismatch {
            expected: a.dim(),
            found: t_op.t.rows(),
        });
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > T::zero())) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("t grid must be positive and increasing".into()));
    }
    let delta = if a.has_kernel() { T::lit(DEFAULT_DELTA) } else { T::zero() };
    let step = eta.step();
    let hs_norm_sq = t_op.hs_norm * t_op.hs_norm;
    let profile = hs_profile(&a.regularized(delta), &t_op.t, eta, workers)?;
    let measures = measures_for(&profile, t_grid, step);
    let monotone = measures.windows(2).all(|w| w[1] <= w[0]);
    let c_fit = if hs_norm_sq > T::zero() {
        t_grid
            .iter()
            .zip(&measures)
            .map(|(&t, &m)| t * m / hs_norm_sq)
            .fold(T::zero(), T::max)
    } else {
        T::zero()
    };
    let decade = active_decade(t_grid, &measures, step);
    let slope = decade.as_ref().map(|idx| {
        let t: Vec<T> = idx.iter().map(|&k| t_grid[k]).collect();
        let m: Vec<T> = idx.iter().map(|&k| measures[k]).collect();
        loglog_slope(&t, &m)
    });
    let delta_sensitivity = match (&decade, delta > T::zero()) {
        (Some(idx), true) => {
            let finer = hs_profile(&a.regularized(delta / T::lit(10.0)), &t_op.t, eta, workers)?;
            let m2 = measures_for(&finer, t_grid, step);
            Some(
                idx.iter()
                    .map(|&k| (m2[k] - measures[k]).abs() / measures[k])
                    .fold(T::zero(), T::max),
            )
        }
        _ => None,
    };
    Ok(Weak11Report {
        t: t_grid.to_vec(),
        measures,
        hs_norm_sq,
        delta,
        eta_step: step,
        c_fit,
        monotone,
        slope,
        decade: decade.map(|idx| (t_grid[idx[0]], t_grid[*idx.last().expect("nonempty")])),
        delta_sensitivity,
    })
}

/// Exact level-set length `2 sqrt(max(0, (t0^2/t)^2 - y^2))` for the scalar
/// case `A = x + iy`, `T = t0`.
pub fn scalar_levelset_length<T: Real>(t0: T, y: T, t: T) -> T {
    let r = t0 * t0 / t;
    T::lit(2.0) * (r * r - y * y).max(T::zero()).sqrt()
}

/// `n` logarithmically spaced values from `lo` to `hi`.
pub fn log_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * T::from_usize_lossy(k) / T::from_usize_lossy(n.max(2) - 1)).exp())
        .collect()
}

fn gaussian_matrix<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix<T> {
    CMatrix::from_fn(n, n, |_, _| cx(T::lit(rng.gen::<f64>() - 0.5), T::lit(rng.gen::<f64>() - 0.5)))
}

/// Random `A = X + iY` with `X` Hermitian of unit scale and `Y = scale · Σ u u†`
/// of the given rank (rank 0 gives `Y = 0`).
pub fn random_dissipative<T: Real, R: Rng + ?Sized>(n: usize, rank: usize, scale: T, rng: &mut R) -> DissipativeOperator<T> {
    let g = gaussian_matrix::<T, R>(n, rng);
    let x = CMatrix::from_fn(n, n, |i, j| (g[(i, j)] + g[(j, i)].conj()) * cx(T::lit(0.5), T::zero()));
    let mut y = CMatrix::zeros(n, n);
    for _ in 0..rank {
        let u: Vec<Cx<T>> = (0..n).map(|_| cx(T::lit(rng.gen::<f64>() - 0.5), T::lit(rng.gen::<f64>() - 0.5))).collect();
        for i in 0..n {
            for j in 0..n {
                y[(i, j)] += u[i] * u[j].conj() * cx(scale, T::zero());
            }
        }
    }
    DissipativeOperator::new(x, y).expect("constructed Hermitian and PSD")
}

pub fn random_hs<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> HSOperator<T> {
    HSOperator::new(gaussian_matrix(n, rng))
}

/// One random configuration of the sparse-versus-dense suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OracleCase<T: Real> {
    pub index: usize,
    pub seed: u64,
    pub extents: Vec<T>,
    pub spacing: T,
    pub lambda: T,
    pub magnetic_field: Option<T>,
    pub points: usize,
    #[serde(rename = "E")]
    pub energy: T,
    pub eps: T,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub radius: T,
    pub report: OracleReport<T>,
}

fn oracle_case<T: Real>(index: usize, seed: u64, max_points: usize, opts: SolverOptions<T>) -> Result<OracleCase<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = max_points.min(DENSE_ORACLE_CAP).max(9);
    let two_d = cap >= 16 && rng.gen_bool(0.5);
    let (extents, spacing) = if two_d {
        let h = 0.5;
        let n1 = rng.gen_range(3..=cap / 3);
        let n2 = rng.gen_range(3..=(cap / n1).max(3));
        (vec![(n1 + 1) as f64 * h, (n2 + 1) as f64 * h], h)
    } else {
        let h = [0.25, 0.5, 1.0][rng.gen_range(0..3)];
        let n = rng.gen_range(3..=cap);
        (vec![(n + 1) as f64 * h], h)
    };
    let lambda = rng.gen_range(0.0..10.0);
    let magnetic_field = (two_d && rng.gen_bool(0.5)).then(|| rng.gen_range(0.0..1.0));
    let d = extents.len() as f64;
    let energy = rng.gen_range(-1.0..(4.0 * d / (spacing * spacing) + lambda));
    let eps = 10f64.powf(rng.gen_range(-3.0..0.0));
    let radius = rng.gen_range(spacing..(2.0f64).max(1.5 * spacing));
    let center = |rng: &mut ChaCha8Rng| -> Vec<f64> { extents.iter().map(|&e| rng.gen_range(spacing..e - spacing)).collect() };
    let x = center(&mut rng);
    let y = center(&mut rng);
    let lit = |v: &[f64]| -> Vec<T> { v.iter().map(|&a| T::lit(a)).collect() };
    let grid = GridSpec::new(lit(&extents), T::lit(spacing))?;
    let mut bg = BackgroundFields::free();
    if let Some(b) = magnetic_field {
        bg = bg.uniform_magnetic_field(T::lit(b), lit(&extents).iter().map(|&e| e * T::lit(0.5)).collect());
    }
    let law = DisorderLaw::new(T::lit(lambda), CouplingDensity::Uniform, grid.site_lattice())?;
    let ens = ModelEnsemble::new(grid.clone(), &bg, SingleSiteProfile::indicator(T::one()), law)?;
    let h = ens.realize(seed)?;
    let z = SpectralShift::new(T::lit(energy), T::lit(eps))?;
    let xs = IndicatorSet::ball(&grid, &lit(&x), T::lit(radius));
    let ys = IndicatorSet::ball(&grid, &lit(&y), T::lit(radius));
    let report = oracle_compare(&h, z, &xs, &ys, opts);
    Ok(OracleCase {
        index,
        seed,
        extents: lit(&extents),
        spacing: T::lit(spacing),
        lambda: T::lit(lambda),
        magnetic_field: magnetic_field.map(T::lit),
        points: grid.len(),
        energy: T::lit(energy),
        eps: T::lit(eps),
        x: lit(&x),
        y: lit(&y),
        radius: T::lit(radius),
        report,
    })
}

/// `count` seeded random models with at most `max_points` grid points, each
/// comparing the sparse block norm against the dense oracle.
pub fn oracle_suite<T: Real>(
    count: usize,
    max_points: usize,
    master_seed: u64,
    opts: SolverOptions<T>,
    workers: &Workers,
) -> Result<Vec<OracleCase<T>>> {
    workers
        .map(count, |k| oracle_case(k, derive_sample_seed(master_seed, k), max_points, opts))
        .into_iter()
        .collect()
}

/// One random `(A, T)` pair of the weak 1-1 suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Weak11Case<T: Real> {
    pub index: usize,
    pub seed: u64,
    pub report: Weak11Report<T>,
    pub pass: bool,
}

/// Slope window accepted for `ln measure` against `ln t`.
pub const WEAK11_SLOPE_RANGE: (f64, f64) = (-1.2, -0.8);

/// Random `dim x dim` pairs with rank-2 dissipative part, `t` spanning
/// `[0.1, 1e3] · ||T||_HS^2`.
pub fn weak11_suite<T: Real>(
    pairs: usize,
    dim: usize,
    eta_points: usize,
    master_seed: u64,
    workers: &Workers,
) -> Result<Vec<Weak11Case<T>>> {
    (0..pairs)
        .map(|k| {
            let seed = derive_sample_seed(master_seed, k);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_dissipative::<T, _>(dim, 2.min(dim), T::lit(1e-3), &mut rng);
            let t = random_hs::<T, _>(dim, &mut rng);
            let eta = EtaGrid {
                points: eta_points,
                ..EtaGrid::scaled_to(&a)
            };
            let hs2 = t.hs_norm * t.hs_norm;
            let ts = log_grid(T::lit(0.1) * hs2, T::lit(1e3) * hs2, 25);
            let report = weak11_levelset_measure(&a, &t, &ts, &eta, workers)?;
            let (lo, hi) = WEAK11_SLOPE_RANGE;
            let pass = report.monotone
                && report
                    .slope
                    .is_some_and(|s| s >= T::lit(lo) && s <= T::lit(hi));
            Ok(Weak11Case {
                index: k,
                seed,
                report,
                pass,
            })
        })
        .collect()
}

/// Scalar `A = x0 + i y0`, `T = t0` against the exact interval length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScalarWeak11Check<T: Real> {
    pub t: Vec<T>,
    pub measured: Vec<T>,
    pub exact: Vec<T>,
    pub eta_step: T,
    pub max_error_in_steps: T,
    pub pass: bool,
}

/// Exact within two grid cells at every `t`.
pub fn scalar_weak11_check<T: Real>(eta_points: usize, workers: &Workers) -> Result<ScalarWeak11Check<T>> {
    let (x0, y0, t0) = (T::lit(0.7), T::lit(0.05), T::lit(1.3));
    let a = DissipativeOperator::new(CMatrix::from_real(1, 1, &[x0]), CMatrix::from_real(1, 1, &[y0]))?;
    let t = HSOperator::new(CMatrix::from_real(1, 1, &[t0]));
    let eta = EtaGrid::new(T::lit(-20.0), T::lit(20.0), eta_points)?;
    let ts = log_grid(T::lit(0.5), T::lit(30.0), 15);
    let rep = weak11_levelset_measure(&a, &t, &ts, &eta, workers)?;
    let exact: Vec<T> = ts.iter().map(|&tv| scalar_levelset_length(t0, y0, tv)).collect();
    let worst = rep
        .measures
        .iter()
        .zip(&exact)
        .fold(T::zero(), |w, (&m, &e)| w.max((m - e).abs() / rep.eta_step));
    Ok(ScalarWeak11Check {
        t: ts,
        measured: rep.measures.clone(),
        exact,
        eta_step: rep.eta_step,
        max_error_in_steps: worst,
        pass: rep.monotone && worst <= T::lit(2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_h0, BackgroundFields, DisorderLaw, Ensemble, GridSpec, ModelEnsemble, SingleSiteProfile};
    use crate::resolvent::SolverMethod;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn oracle_scalar_and_diagonal() {
        let h = DiscreteHamiltonian::chain(&[2.0f64], &[]).unwrap();
        let z = cx(0.5, 0.1);
        let r = dense_resolvent_oracle(&h, z, 500).unwrap();
        assert!((r[(0, 0)] - cx(1.0, 0.0) / (cx(2.0, 0.0) - z)).norm() < 1e-15);
        let d = [1.0, -2.0, 3.5];
        let h = DiscreteHamiltonian::chain(&d, &[0.0, 0.0]).unwrap();
        let r = dense_resolvent_oracle(&h, z, 500).unwrap();
        for (i, &di) in d.iter().enumerate() {
            assert!((r[(i, i)] - cx(1.0, 0.0) / (cx(di, 0.0) - z)).norm() < 1e-15);
        }
    }

    #[test]
    fn oracle_adjoint_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let diag: Vec<f64> = (0..100).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let hop: Vec<f64> = (0..99).map(|_| rng.gen::<f64>() - 0.5).collect();
        let h = DiscreteHamiltonian::chain(&diag, &hop).unwrap();
        let z = cx(0.3, 0.2);
        let r = dense_resolvent_oracle(&h, z, 500).unwrap();
        let rc = dense_resolvent_oracle(&h, z.conj(), 500).unwrap();
        let diff = CMatrix::from_fn(100, 100, |i, j| r.adjoint()[(i, j)] - rc[(i, j)]).max_abs();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn oracle_cap() {
        let h = DiscreteHamiltonian::chain(&[0.0f64; 10], &[1.0; 9]).unwrap();
        assert!(matches!(
            dense_resolvent_oracle(&h, cx(0.0, 1.0), 5),
            Err(Error::DenseCapExceeded { dim: 10, cap: 5 })
        ));
    }

    #[test]
    fn compare_deterministic_and_negative_control() {
        let g = GridSpec::new(vec![30.0], 0.25).unwrap();
        let h = assemble_h0(&g, &BackgroundFields::free()).unwrap();
        let z = SpectralShift::new(3.0, 0.05).unwrap();
        let x = IndicatorSet::ball(&g, &[5.0], 1.0);
        let y = IndicatorSet::ball(&g, &[20.0], 1.0);
        let rep = oracle_compare(&h, z, &x, &y, SolverOptions::default());
        assert!(rep.pass, "{rep:?}");
        let loose = SolverOptions {
            tol: 1e-3,
            method: SolverMethod::Iterative,
            ..SolverOptions::default()
        };
        let law = DisorderLaw::uniform_on(&g, 3.0).unwrap();
        let ens = ModelEnsemble::new(g.clone(), &BackgroundFields::free(), SingleSiteProfile::indicator(1.0), law).unwrap();
        let hr = ens.realize(1).unwrap();
        let bad = oracle_compare(&hr, z, &x, &y, loose);
        assert!(!bad.pass, "{bad:?}");
    }

    #[test]
    fn dissipative_checks() {
        let x = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let y = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(DissipativeOperator::new(x.clone(), y).is_err());
        let y = CMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let a = DissipativeOperator::new(x, y).unwrap();
        assert!(a.has_kernel());
        let t = HSOperator::new(CMatrix::from_real(2, 2, &[1.0f64, 2.0, 2.0, 4.0]));
        assert!((t.hs_norm - 5.0).abs() < 1e-15);
    }

    #[test]
    fn zero_t_gives_empty_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_dissipative::<f64, _>(5, 1, 0.01, &mut rng);
        let t = HSOperator::new(CMatrix::zeros(5, 5));
        let eta = EtaGrid::new(-10.0, 10.0, 2000).unwrap();
        let rep = weak11_levelset_measure(&a, &t, &[0.1, 1.0, 10.0], &eta, &Workers::serial()).unwrap();
        assert!(rep.measures.iter().all(|&m| m == 0.0));
        assert!(rep.slope.is_none());
    }

    #[test]
    fn scalar_case_matches_interval_length() {
        let (x0, y0, t0) = (0.7f64, 0.05, 1.3);
        let a = DissipativeOperator::new(CMatrix::from_real(1, 1, &[x0]), CMatrix::from_real(1, 1, &[y0])).unwrap();
        let t = HSOperator::new(CMatrix::from_real(1, 1, &[t0]));
        let eta = EtaGrid::new(-20.0, 20.0, 100_000).unwrap();
        let ts = log_grid(0.5, 30.0, 15);
        let rep = weak11_levelset_measure(&a, &t, &ts, &eta, &Workers::serial()).unwrap();
        for (&tv, &m) in ts.iter().zip(&rep.measures) {
            let exact = scalar_levelset_length(t0, y0, tv);
            assert!((m - exact).abs() <= 2.0 * rep.eta_step, "t={tv} {m} {exact}");
            assert!(m <= 2.0 * t0 * t0 / tv + 2.0 * rep.eta_step);
        }
        assert!(rep.monotone);
    }

    #[test]
    fn random_pairs_scale_like_inverse_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..3 {
            let a = random_dissipative::<f64, _>(5, 2, 1e-3, &mut rng);
            let t = random_hs::<f64, _>(5, &mut rng);
            let eta = EtaGrid::scaled_to(&a);
            let eta = EtaGrid { points: 20_000, ..eta };
            let hs2 = t.hs_norm * t.hs_norm;
            let ts = log_grid(0.1 * hs2, 1e3 * hs2, 25);
            let rep = weak11_levelset_measure(&a, &t, &ts, &eta, &Workers::serial()).unwrap();
            assert!(rep.monotone);
            let slope = rep.slope.unwrap();
            assert!((-1.2..=-0.8).contains(&slope), "{slope} {:?}", rep.measures);
            assert!(rep.delta_sensitivity.unwrap() < 0.05);
        }
    }

    #[test]
    fn suites_pass_on_small_budgets() {
        let cases = oracle_suite::<f64>(6, 120, 3, SolverOptions::default(), &Workers::serial()).unwrap();
        assert_eq!(cases.len(), 6);
        for c in &cases {
            assert!(c.points <= 120);
            assert!(c.report.pass, "{c:?}");
        }
        let w = weak11_suite::<f64>(2, 5, 20_000, 9, &Workers::serial()).unwrap();
        assert!(w.iter().all(|c| c.pass), "{w:?}");
        assert!(scalar_weak11_check::<f64>(100_000, &Workers::serial()).unwrap().pass);
    }
}
