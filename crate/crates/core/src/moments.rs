//! Monte Carlo estimates of fractional moments `E(||1_X (H - z)^{-1} 1_Y||^s)`
//! over the disorder ensemble.
//!
//! Sample `i` always uses the realization seeded by
//! `derive_sample_seed(master, i)`, so estimates at different shifts share
//! their realizations (common random numbers). Samples may be evaluated in
//! parallel; they are collected in index order and summed sequentially, which
//! keeps every digit independent of the worker count.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_sample_seed, DiscreteHamiltonian, Ensemble};
use crate::resolvent::{block_operator_norm, IndicatorSet, SolverOptions, SpectralShift};
use crate::scalar::{cx, Real};

/// Worker pool for sample evaluation.
#[derive(Clone, Default)]
pub struct Workers {
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Workers({})", self.count())
    }
}

impl Workers {
    pub fn serial() -> Self {
        Self { pool: None }
    }

    pub fn new(threads: usize) -> Result<Self> {
        if threads <= 1 {
            return Ok(Self::serial());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        Ok(Self {
            pool: Some(Arc::new(pool)),
        })
    }

    pub fn count(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// `f(0), ..., f(n - 1)` in index order.
    pub fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}

/// The exponent `s` of a fractional moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalExponent<T: Real>(T);

impl<T: Real> FractionalExponent<T> {
    /// `s` in the open interval `(0, 1)`.
    pub fn new(s: T) -> Result<Self> {
        if s > T::zero() && s < T::one() {
            Ok(Self(s))
        } else {
            Err(Error::ExponentOutOfRange(s.as_f64(), "(0, 1)"))
        }
    }

    /// Any positive exponent, for contrast runs such as `s = 1`.
    pub fn diagnostic(s: T) -> Result<Self> {
        if s > T::zero() && s.is_finite() {
            Ok(Self(s))
        } else {
            Err(Error::ExponentOutOfRange(s.as_f64(), "(0, inf)"))
        }
    }

    pub fn value(&self) -> T {
        self.0
    }
}

/// Sample statistics of `m_i^s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MomentSummary<T: Real> {
    pub samples: usize,
    pub mean: T,
    pub stderr: T,
    pub min: T,
    pub max: T,
}

impl<T: Real> MomentSummary<T> {
    /// Statistics of `values[i]^s`, summed in index order.
    pub fn of_powers(values: &[T], s: T) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("moment estimate needs at least one sample".into()));
        }
        let powered: Vec<T> = values.iter().map(|v| v.powf(s)).collect();
        Ok(Self::of_values(&powered))
    }

    pub fn of_values(values: &[T]) -> Self {
        let n = values.len();
        let min = values.iter().copied().fold(T::infinity(), T::min);
        let max = values.iter().copied().fold(T::neg_infinity(), T::max);
        if min == max {
            return Self {
                samples: n,
                mean: min,
                stderr: T::zero(),
                min,
                max,
            };
        }
        let nf = T::from_usize_lossy(n);
        let mean = values.iter().fold(T::zero(), |acc, &v| acc + v) / nf;
        let stderr = if n > 1 {
            let ss = values.iter().fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean));
            (ss / (nf - T::one()) / nf).sqrt()
        } else {
            T::zero()
        };
        Self {
            samples: n,
            mean,
            stderr,
            min,
            max,
        }
    }

    pub fn relative_error(&self) -> T {
        if self.mean > T::zero() {
            self.stderr / self.mean
        } else {
            T::zero()
        }
    }
}

/// Monte Carlo estimate of `E(||1_X (H - E - i eps)^{-1} 1_Y||^s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MomentEstimate<T: Real> {
    pub s: T,
    #[serde(rename = "E")]
    pub energy: T,
    pub eps: T,
    pub x: Vec<T>,
    pub y: Vec<T>,
    #[serde(rename = "N")]
    pub samples: usize,
    pub mean: T,
    pub stderr: T,
    pub min: T,
    pub max: T,
    pub seed: u64,
}

impl<T: Real> MomentEstimate<T> {
    pub fn from_summary(
        s: T,
        z: SpectralShift<T>,
        x: Vec<T>,
        y: Vec<T>,
        summary: MomentSummary<T>,
        seed: u64,
    ) -> Self {
        Self {
            s,
            energy: z.energy(),
            eps: z.eps(),
            x,
            y,
            samples: summary.samples,
            mean: summary.mean,
            stderr: summary.stderr,
            min: summary.min,
            max: summary.max,
            seed,
        }
    }

    pub fn relative_error(&self) -> T {
        if self.mean > T::zero() {
            self.stderr / self.mean
        } else {
            T::zero()
        }
    }
}

/// Evaluates `observe` on `n` realizations, returning results in sample order.
///
/// A failing sample aborts the run and reports its index and seed.
pub fn sample_observable<T, E, F, R>(
    ensemble: &E,
    n: usize,
    master_seed: u64,
    workers: &Workers,
    observe: F,
) -> Result<Vec<R>>
where
    T: Real,
    E: Ensemble<T> + ?Sized,
    F: Fn(&DiscreteHamiltonian<T>) -> Result<R> + Sync + Send,
    R: Send + Clone,
{
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let eval = |i: usize| -> Result<R> {
        let seed = derive_sample_seed(master_seed, i);
        ensemble
            .realize(seed)
            .and_then(|h| observe(&h))
            .map_err(|e| Error::SampleFailed {
                index: i,
                seed,
                source: Box::new(e),
            })
    };
    if ensemble.is_deterministic() {
        let first = eval(0)?;
        return Ok(vec![first; n]);
    }
    workers.map(n, eval).into_iter().collect()
}

/// Block norms at every shift for each sample: `result[sample][shift]`.
pub fn sample_block_norms<T, E>(
    ensemble: &E,
    shifts: &[SpectralShift<T>],
    x: &IndicatorSet<T>,
    y: &IndicatorSet<T>,
    n: usize,
    master_seed: u64,
    opts: SolverOptions<T>,
    workers: &Workers,
) -> Result<Vec<Vec<T>>>
where
    T: Real,
    E: Ensemble<T> + ?Sized,
{
    sample_observable(ensemble, n, master_seed, workers, |h| {
        shifts
            .iter()
            .map(|&z| block_operator_norm(h, z, x, y, opts))
            .collect()
    })
}

/// Summaries per shift from per-sample rows `norms[sample][shift]`.
pub fn summarize_columns<T: Real>(norms: &[Vec<T>], s: T) -> Result<Vec<MomentSummary<T>>> {
    let k = norms.first().map_or(0, |r| r.len());
    (0..k)
        .map(|j| {
            let col: Vec<T> = norms.iter().map(|row| row[j]).collect();
            MomentSummary::of_powers(&col, s)
        })
        .collect()
}

/// `E(||1_X (H - z)^{-1} 1_Y||^s)` over `n` realizations.
#[allow(clippy::too_many_arguments)]
pub fn estimate_fractional_moment<T, E>(
    ensemble: &E,
    s: FractionalExponent<T>,
    z: SpectralShift<T>,
    x: &IndicatorSet<T>,
    y: &IndicatorSet<T>,
    n: usize,
    master_seed: u64,
    opts: SolverOptions<T>,
    workers: &Workers,
) -> Result<MomentEstimate<T>>
where
    T: Real,
    E: Ensemble<T> + ?Sized,
{
    let norms = sample_block_norms(ensemble, &[z], x, y, n, master_seed, opts, workers)?;
    let summary = summarize_columns(&norms, s.value())?[0];
    Ok(MomentEstimate::from_summary(
        s.value(),
        z,
        x.center.clone(),
        y.center.clone(),
        summary,
        master_seed,
    ))
}

/// Strictly decreasing positive regularizations `eps_1 > ... > eps_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EpsilonSchedule<T: Real> {
    values: Vec<T>,
    tolerance: T,
}

/// Default relative change accepted between the last two scan points.
pub const DEFAULT_STABILITY_TOLERANCE: f64 = 0.05;

impl<T: Real> EpsilonSchedule<T> {
    pub fn new(values: Vec<T>, tolerance: T) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty epsilon schedule".into()));
        }
        if values.iter().any(|&e| !(e > T::zero()) || !e.is_finite()) {
            return Err(Error::InvalidArgument("epsilon values must be positive".into()));
        }
        if values.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidArgument("epsilon schedule must be strictly decreasing".into()));
        }
        if !(tolerance > T::zero()) {
            return Err(Error::InvalidArgument("stability tolerance must be positive".into()));
        }
        Ok(Self { values, tolerance })
    }

    /// `start, start * ratio, ...` with `count` entries, `ratio < 1`.
    pub fn geometric(start: T, ratio: T, count: usize) -> Result<Self> {
        let values = (0..count).map(|k| start * ratio.powi(k as i32)).collect();
        Self::new(values, T::lit(DEFAULT_STABILITY_TOLERANCE))
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn tolerance(&self) -> T {
        self.tolerance
    }

    pub fn smallest(&self) -> T {
        *self.values.last().expect("nonempty schedule")
    }

    pub fn shifts(&self, energy: T) -> Result<Vec<SpectralShift<T>>> {
        self.values.iter().map(|&e| SpectralShift::new(energy, e)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StabilityVerdict<T: Real> {
    pub stable: bool,
    /// `|m_K - m_{K-1}| / m_K`; zero for single-point schedules.
    pub relative_change: T,
}

impl<T: Real> StabilityVerdict<T> {
    pub fn from_means(means: &[T], tolerance: T) -> Self {
        let relative_change = match means {
            [.., a, b] => {
                let diff = (*b - *a).abs();
                if diff == T::zero() {
                    T::zero()
                } else {
                    diff / b.abs().max(T::min_positive_value())
                }
            }
            _ => T::zero(),
        };
        Self {
            stable: relative_change < tolerance,
            relative_change,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EpsilonScan<T: Real> {
    pub estimates: Vec<MomentEstimate<T>>,
    pub verdict: StabilityVerdict<T>,
}

impl<T: Real> EpsilonScan<T> {
    pub fn last(&self) -> &MomentEstimate<T> {
        self.estimates.last().expect("nonempty scan")
    }
}

/// Assembles a scan from per-sample rows over the schedule.
pub fn scan_from_norms<T: Real>(
    norms: &[Vec<T>],
    s: T,
    shifts: &[SpectralShift<T>],
    x: Vec<T>,
    y: Vec<T>,
    tolerance: T,
    master_seed: u64,
) -> Result<EpsilonScan<T>> {
    let summaries = summarize_columns(norms, s)?;
    let estimates: Vec<_> = summaries
        .iter()
        .zip(shifts)
        .map(|(sum, &z)| MomentEstimate::from_summary(s, z, x.clone(), y.clone(), *sum, master_seed))
        .collect();
    let means: Vec<T> = estimates.iter().map(|e| e.mean).collect();
    Ok(EpsilonScan {
        estimates,
        verdict: StabilityVerdict::from_means(&means, tolerance),
    })
}

/// Moments along the schedule at fixed energy, with common realizations.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_scan<T, E>(
    ensemble: &E,
    s: FractionalExponent<T>,
    energy: T,
    schedule: &EpsilonSchedule<T>,
    x: &IndicatorSet<T>,
    y: &IndicatorSet<T>,
    n: usize,
    master_seed: u64,
    opts: SolverOptions<T>,
    workers: &Workers,
) -> Result<EpsilonScan<T>>
where
    T: Real,
    E: Ensemble<T> + ?Sized,
{
    let shifts = schedule.shifts(energy)?;
    let norms = sample_block_norms(ensemble, &shifts, x, y, n, master_seed, opts, workers)?;
    scan_from_norms(
        &norms,
        s.value(),
        &shifts,
        x.center.clone(),
        y.center.clone(),
        schedule.tolerance(),
        master_seed,
    )
}

fn shift_distance<T: Real>(a: SpectralShift<T>, b: SpectralShift<T>) -> T {
    (a.z() - b.z()).norm()
}

/// `|m(z1) - m(z2)| / |z1 - z2|^s` with both moments on common realizations.
#[allow(clippy::too_many_arguments)]
pub fn holder_modulus<T, E>(
    ensemble: &E,
    s: FractionalExponent<T>,
    z1: SpectralShift<T>,
    z2: SpectralShift<T>,
    x: &IndicatorSet<T>,
    y: &IndicatorSet<T>,
    n: usize,
    master_seed: u64,
    opts: SolverOptions<T>,
    workers: &Workers,
) -> Result<T>
where
    T: Real,
    E: Ensemble<T> + ?Sized,
{
    let dz = shift_distance(z1, z2);
    if dz == T::zero() {
        return Err(Error::InvalidArgument("Hölder ratio undefined for z1 = z2".into()));
    }
    let norms = sample_block_norms(ensemble, &[z1, z2], x, y, n, master_seed, opts, workers)?;
    let m = summarize_columns(&norms, s.value())?;
    Ok((m[0].mean - m[1].mean).abs() / dz.powf(s.value()))
}

/// Hölder moduli over a square grid of shifts around `E + i eps0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HolderGrid<T: Real> {
    pub energy: T,
    pub eps0: T,
    pub spacing: T,
    /// Points per side (odd).
    pub side: usize,
    /// Moment means in row-major order, rows indexed by the imaginary offset.
    pub means: Vec<T>,
    /// Largest `|m(z) - m(w)| / |z - w|^s` over all pairs of grid points.
    pub max_modulus: T,
}

/// Moments on the `side x side` grid `E + j d + i (eps0 + k d)`,
/// `j, k = -(side / 2) ..= side / 2`, and their largest pairwise Hölder ratio.
#[allow(clippy::too_many_arguments)]
pub fn holder_grid<T, E>(
    ensemble: &E,
    s: FractionalExponent<T>,
    energy: T,
    eps0: T,
    spacing: T,
    side: usize,
    x: &IndicatorSet<T>,
    y: &IndicatorSet<T>,
    n: usize,
    master_seed: u64,
    opts: SolverOptions<T>,
    workers: &Workers,
) -> Result<HolderGrid<T>>
where
    T: Real,
    E: Ensemble<T> + ?Sized,
{
    if side < 2 || side % 2 == 0 {
        return Err(Error::InvalidArgument("grid side must be odd and at least 3".into()));
    }
    let half = (side / 2) as i32;
    let mut shifts = Vec::with_capacity(side * side);
    for k in -half..=half {
        for j in -half..=half {
            let e = energy + spacing * T::from_i32(j).expect("small");
            let eps = eps0 + spacing * T::from_i32(k).expect("small");
            shifts.push(SpectralShift::new(e, eps)?);
        }
    }
    let norms = sample_block_norms(ensemble, &shifts, x, y, n, master_seed, opts, workers)?;
    let means: Vec<T> = summarize_columns(&norms, s.value())?.iter().map(|m| m.mean).collect();
    let mut max_modulus = T::zero();
    for a in 0..shifts.len() {
        for b in a + 1..shifts.len() {
            let dz = shift_distance(shifts[a], shifts[b]);
            let ratio = (means[a] - means[b]).abs() / dz.powf(s.value());
            max_modulus = max_modulus.max(ratio);
        }
    }
    Ok(HolderGrid {
        energy,
        eps0,
        spacing,
        side,
        means,
        max_modulus,
    })
}

/// `|1/|a - z1|^s - 1/|a - z2|^s| / |z1 - z2|^s` for the 1x1 operator `[a]`.
pub fn scalar_holder_modulus<T: Real>(a: T, s: T, z1: SpectralShift<T>, z2: SpectralShift<T>) -> T {
    let m = |z: SpectralShift<T>| (cx(a, T::zero()) - z.z()).norm().powf(-s);
    (m(z1) - m(z2)).abs() / shift_distance(z1, z2).powf(s)
}
