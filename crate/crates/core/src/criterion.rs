//! The finite-volume localization criterion, its prefactor envelopes, the
//! modified distance `dist_Ω`, and exponential decay fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_sample_seed, DomainMask, Ensemble, GridSpec, ModelEnsemble};
use crate::moments::{
    sample_observable, scan_from_norms, summarize_columns, EpsilonScan, EpsilonSchedule, FractionalExponent,
    MomentEstimate, Workers,
};
use crate::resolvent::{
    block_norms_from_source, block_operator_norm, boundary_layer_indices, IndicatorSet, SolverOptions,
    SpectralShift, DEFAULT_LAYER_DEPTH,
};
use crate::scalar::Real;

fn euclid<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>().sqrt()
}

/// `dist_Ω(x, y) = min{|x - y|, dist(x, Ω^c) + dist(y, Ω^c)}` where `Ω^c` is
/// the box exterior together with the inactive grid points of the mask.
#[derive(Debug, Clone, Copy)]
pub struct ModifiedDistance<'a, T: Real> {
    grid: &'a GridSpec<T>,
    mask: &'a DomainMask,
}

impl<'a, T: Real> ModifiedDistance<'a, T> {
    pub fn new(grid: &'a GridSpec<T>, mask: &'a DomainMask) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: mask.len(),
            });
        }
        Ok(Self { grid, mask })
    }

    fn check_inside(&self, x: &[T]) -> Result<()> {
        let outside = || Error::PointOutsideDomain(x.iter().map(|v| v.as_f64()).collect());
        if !self.grid.contains_open(x) {
            return Err(outside());
        }
        match self.grid.nearest_index(x) {
            Some(i) if self.mask.contains(i) => Ok(()),
            _ => Err(outside()),
        }
    }

    /// `dist(x, Ω^c)`.
    pub fn to_complement(&self, x: &[T]) -> Result<T> {
        self.check_inside(x)?;
        let mut d = self.grid.distance_to_box_exterior(x);
        for i in (0..self.grid.len()).filter(|&i| !self.mask.contains(i)) {
            d = d.min(euclid(x, &self.grid.coords(i)));
        }
        Ok(d)
    }

    pub fn distance(&self, x: &[T], y: &[T]) -> Result<T> {
        let direct = euclid(x, y);
        let through = self.to_complement(x)? + self.to_complement(y)?;
        Ok(direct.min(through))
    }
}

/// `dist_Ω(x, y)` for `Ω` given by `mask` on `grid`.
pub fn modified_distance<T: Real>(x: &[T], y: &[T], mask: &DomainMask, grid: &GridSpec<T>) -> Result<T> {
    ModifiedDistance::new(grid, mask)?.distance(x, y)
}

/// `C (1+λ)^{s(d+2)} / (1-s) · (1+1/λ)^s · (1+|E-E0|)^{s(d+2)}`.
pub fn lemma1_bound<T: Real>(s: T, lambda: T, energy: T, e0: T, d: usize, c_const: T) -> Result<T> {
    let s = FractionalExponent::new(s)?.value();
    if !(lambda > T::zero()) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    let one = T::one();
    let dd = T::from_usize_lossy(d);
    let two = T::lit(2.0);
    Ok(c_const * (one + lambda).powf(s * (dd + two)) / (one - s)
        * (one + one / lambda).powf(s)
        * (one + (energy - e0).abs()).powf(s * (dd + two)))
}

/// The prefactor `M_{s,λ}` of the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", bound = "T: Real")]
pub enum MomentPrefactor<T: Real> {
    /// `M_const (1+λ)^{5s(d+4)} / (1-3s)`.
    Formula { m_const: T },
    /// A fixed value of `M_{s,λ}`.
    Explicit { value: T },
}

impl<T: Real> Default for MomentPrefactor<T> {
    fn default() -> Self {
        Self::Formula { m_const: T::one() }
    }
}

impl<T: Real> MomentPrefactor<T> {
    pub fn evaluate(&self, s: T, lambda: T, d: usize) -> T {
        match *self {
            Self::Formula { m_const } => {
                let one = T::one();
                let exp = T::lit(5.0) * s * (T::from_usize_lossy(d) + T::lit(4.0));
                m_const * (one + lambda).powf(exp) / (one - T::lit(3.0) * s)
            }
            Self::Explicit { value } => value,
        }
    }
}

/// Inputs of [`criterion_factor`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CriterionParams<T: Real> {
    pub s: T,
    pub lambda: T,
    #[serde(rename = "E")]
    pub energy: T,
    #[serde(rename = "E0")]
    pub e0: T,
    #[serde(rename = "L")]
    pub l: T,
    /// Single-site radius; the criterion needs `L > 24 r`.
    pub r: T,
    pub d: usize,
    pub raw_moment: T,
    pub prefactor: MomentPrefactor<T>,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::scalar::Real;

    pub fn serialize<T: Real, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_infinite() => s.serialize_str("inf"),
            Some(x) => x.serialize(s),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(T::lit(x))),
            Some(Repr::Text(t)) if t == "inf" => Ok(Some(T::infinity())),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CriterionReport<T: Real> {
    pub s: T,
    pub lambda: T,
    #[serde(rename = "E")]
    pub energy: T,
    #[serde(rename = "E0")]
    pub e0: T,
    #[serde(rename = "L")]
    pub l: T,
    pub d: usize,
    pub raw_moment: T,
    pub prefactor: MomentPrefactor<T>,
    /// Evaluated `M_{s,λ}`.
    #[serde(rename = "M")]
    pub m: T,
    pub factor: T,
    /// `-ln(factor)`; `"inf"` when the raw moment vanishes.
    #[serde(with = "unbounded", default)]
    pub gamma: Option<T>,
    /// `gamma / (2L)`.
    #[serde(with = "unbounded", default)]
    pub predicted_rate: Option<T>,
}

impl<T: Real> CriterionReport<T> {
    pub fn satisfied(&self) -> bool {
        self.factor < T::one()
    }
}

/// Evaluates the finite-volume criterion
/// `M (1+1/λ)^{2s} (1+|E-E0|)^{5s(d+2)} (1+L)^{2(d-1)} · raw_moment`.
pub fn criterion_factor<T: Real>(p: &CriterionParams<T>) -> Result<CriterionReport<T>> {
    let third = T::one() / T::lit(3.0);
    if !(p.s > T::zero() && p.s < third) {
        return Err(Error::ExponentOutOfRange(p.s.as_f64(), "(0, 1/3)"));
    }
    if !(p.lambda > T::zero()) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    let min_l = T::lit(24.0) * p.r;
    if !(p.l > min_l) {
        return Err(Error::DomainTooSmall {
            l: p.l.as_f64(),
            min: min_l.as_f64(),
        });
    }
    if !(p.raw_moment >= T::zero()) || !p.raw_moment.is_finite() {
        return Err(Error::InvalidArgument("raw moment must be finite and nonnegative".into()));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let s = p.s;
    let dd = T::from_usize_lossy(p.d);
    let m = p.prefactor.evaluate(s, p.lambda, p.d);
    let factor = m
        * (one + one / p.lambda).powf(two * s)
        * (one + (p.energy - p.e0).abs()).powf(T::lit(5.0) * s * (dd + two))
        * (one + p.l).powf(two * (dd - one))
        * p.raw_moment;
    let gamma = if factor < one {
        Some(if factor == T::zero() { T::infinity() } else { -factor.ln() })
    } else {
        None
    };
    Ok(CriterionReport {
        s,
        lambda: p.lambda,
        energy: p.energy,
        e0: p.e0,
        l: p.l,
        d: p.d,
        raw_moment: p.raw_moment,
        prefactor: p.prefactor,
        m,
        factor,
        gamma,
        predicted_rate: gamma.map(|g| g / (two * p.l)),
    })
}

/// Ball radius `L`, bump radius `r` and depth of the boundary layer `δB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryLayer<T: Real> {
    #[serde(rename = "L")]
    pub l: T,
    pub r: T,
    pub depth: T,
}

impl<T: Real> BoundaryLayer<T> {
    /// Layer depth `23 r`.
    pub fn new(l: T, r: T) -> Result<Self> {
        Self::with_depth(l, r, T::lit(DEFAULT_LAYER_DEPTH) * r)
    }

    pub fn with_depth(l: T, r: T, depth: T) -> Result<Self> {
        if !(r > T::zero()) || !(depth > T::zero()) {
            return Err(Error::InvalidArgument("layer radius and depth must be positive".into()));
        }
        if !(l > depth + r) {
            return Err(Error::DomainTooSmall {
                l: l.as_f64(),
                min: (depth + r).as_f64(),
            });
        }
        Ok(Self { l, r, depth })
    }
}

/// Stabilized boundary moments per `α` and their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RawBoundaryMoment<T: Real> {
    pub value: T,
    /// Index into `alphas` attaining the maximum.
    pub argmax: usize,
    pub alphas: Vec<Vec<T>>,
    pub scans: Vec<EpsilonScan<T>>,
    pub warnings: Vec<String>,
}

impl<T: Real> RawBoundaryMoment<T> {
    /// Estimate at the last schedule point for `alphas[k]`.
    pub fn estimate(&self, k: usize) -> &MomentEstimate<T> {
        self.scans[k].last()
    }
}

/// `max_α E(||χ_α (H^{(B_α^L)} - E - iε)^{-1} 1_{δB_α^L}||^s)` at the smallest
/// ε of `schedule`.
///
/// The supremum over the lattice is approximated by the supplied `alphas`.
/// An unstable ε-scan attaches a warning and its last value is used.
#[allow(clippy::too_many_arguments)]
pub fn estimate_raw_boundary_moment<T: Real>(
    ensemble: &ModelEnsemble<T>,
    s: FractionalExponent<T>,
    energy: T,
    layer: BoundaryLayer<T>,
    schedule: &EpsilonSchedule<T>,
    alphas: &[Vec<T>],
    n: usize,
    master_seed: u64,
    opts: SolverOptions<T>,
    workers: &Workers,
) -> Result<RawBoundaryMoment<T>> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("no ball centres supplied".into()));
    }
    let shifts = schedule.shifts(energy)?;
    let mut scans = Vec::with_capacity(alphas.len());
    let mut warnings = Vec::new();
    for alpha in alphas {
        let ball = ensemble.restricted_to_ball(alpha, layer.l)?;
        let grid = ensemble.grid();
        let source = IndicatorSet::ball(grid, alpha, layer.r);
        let target = boundary_layer_indices(grid, alpha, layer.l, layer.r, layer.depth)?;
        let norms = sample_observable(&ball, n, master_seed, workers, |h| {
            shifts
                .iter()
                .map(|&z| block_operator_norm(h, z, &source, &target, opts))
                .collect::<Result<Vec<T>>>()
        })?;
        let scan = scan_from_norms(
            &norms,
            s.value(),
            &shifts,
            alpha.clone(),
            alpha.clone(),
            schedule.tolerance(),
            master_seed,
        )?;
        if !scan.verdict.stable {
            warnings.push(format!(
                "epsilon scan at alpha {:?} not stable: relative change {:.3e}",
                alpha.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
                scan.verdict.relative_change.as_f64()
            ));
        }
        scans.push(scan);
    }
    let mut argmax = 0;
    for (k, scan) in scans.iter().enumerate() {
        if scan.last().mean > scans[argmax].last().mean {
            argmax = k;
        }
    }
    Ok(RawBoundaryMoment {
        value: scans[argmax].last().mean,
        argmax,
        alphas: alphas.to_vec(),
        scans,
        warnings,
    })
}

/// `moment ≈ A e^{-μ dist}` fitted in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DecayFit<T: Real> {
    #[serde(rename = "A")]
    pub amplitude: T,
    pub mu: T,
    pub r2: T,
    pub points: Vec<(T, T)>,
}

fn check_decay_points<T: Real>(points: &[(T, T)]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points, need at least 3", points.len())));
    }
    let first = points[0].0;
    if points.iter().all(|p| p.0 == first) {
        return Err(Error::InsufficientData("need at least 2 distinct distances".into()));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > T::zero()) || !p.1.is_finite()) {
        return Err(Error::InvalidArgument(format!("nonpositive moment {} at distance {}", p.1, p.0)));
    }
    Ok(())
}

fn weighted_log_fit<T: Real>(points: &[(T, T)], weights: &[T]) -> DecayFit<T> {
    let w_sum: T = weights.iter().copied().sum();
    let logs: Vec<T> = points.iter().map(|p| p.1.ln()).collect();
    let xm = points.iter().zip(weights).map(|(p, &w)| w * p.0).sum::<T>() / w_sum;
    let ym = logs.iter().zip(weights).map(|(&y, &w)| w * y).sum::<T>() / w_sum;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for ((p, &y), &w) in points.iter().zip(&logs).zip(weights) {
        let dx = p.0 - xm;
        let dy = y - ym;
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let flat = logs.iter().all(|&y| y == logs[0]);
    let slope = if flat { T::zero() } else { sxy / sxx };
    let intercept = ym - slope * xm;
    let r2 = if !flat && syy > T::zero() {
        let ss_res: T = points
            .iter()
            .zip(&logs)
            .zip(weights)
            .map(|((p, &y), &w)| {
                let e = y - (intercept + slope * p.0);
                w * e * e
            })
            .sum();
        (T::one() - ss_res / syy).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    DecayFit {
        amplitude: intercept.exp(),
        mu: if slope == T::zero() { T::zero() } else { -slope },
        r2,
        points: points.to_vec(),
    }
}

/// Unweighted least squares of `ln(moment)` against distance.
pub fn fit_exponential_decay<T: Real>(points: &[(T, T)]) -> Result<DecayFit<T>> {
    check_decay_points(points)?;
    Ok(weighted_log_fit(points, &vec![T::one(); points.len()]))
}

/// Least squares weighted by `(moment / stderr)^2`, the inverse variance of
/// `ln(moment)` to first order. Points with zero stderr get the largest
/// weight present (or unit weight if all stderrs vanish).
pub fn fit_exponential_decay_weighted<T: Real>(points: &[(T, T)], stderr: &[T]) -> Result<DecayFit<T>> {
    check_decay_points(points)?;
    if stderr.len() != points.len() {
        return Err(Error::ShapeMismatch {
            expected: points.len(),
            found: stderr.len(),
        });
    }
    let raw: Vec<Option<T>> = points
        .iter()
        .zip(stderr)
        .map(|(p, &e)| if e > T::zero() { Some((p.1 / e).powi(2)) } else { None })
        .collect();
    let cap = raw.iter().flatten().copied().fold(T::zero(), T::max);
    let cap = if cap > T::zero() { cap } else { T::one() };
    let weights: Vec<T> = raw.iter().map(|w| w.unwrap_or(cap)).collect();
    Ok(weighted_log_fit(points, &weights))
}

/// Source ball and target balls at increasing distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DistanceLadder<T: Real> {
    pub source: Vec<T>,
    pub targets: Vec<Vec<T>>,
    pub radius: T,
}

impl<T: Real> DistanceLadder<T> {
    /// Targets at `source + t e_1` for each `t` in `offsets`.
    pub fn along_first_axis(source: Vec<T>, offsets: &[T], radius: T) -> Self {
        let targets = offsets
            .iter()
            .map(|&t| {
                let mut p = source.clone();
                p[0] += t;
                p
            })
            .collect();
        Self {
            source,
            targets,
            radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LadderPoint<T: Real> {
    /// `dist_Ω` between the ball centres.
    pub distance: T,
    pub estimate: MomentEstimate<T>,
}

/// `E(||1_{B(x, r)} R(z) 1_{B(y_k, r)}||^s)` along a ladder, sharing one
/// factorization per realization.
#[allow(clippy::too_many_arguments)]
pub fn moment_ladder<T, E>(
    ensemble: &E,
    s: FractionalExponent<T>,
    z: SpectralShift<T>,
    ladder: &DistanceLadder<T>,
    n: usize,
    master_seed: u64,
    opts: SolverOptions<T>,
    workers: &Workers,
) -> Result<Vec<LadderPoint<T>>>
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
    let norms = sample_observable(ensemble, n, master_seed, workers, |h| {
        block_norms_from_source(h, z, &x, &ys, opts)
    })?;
    let summaries = summarize_columns(&norms, s.value())?;
    Ok(summaries
        .into_iter()
        .zip(distances)
        .zip(&ladder.targets)
        .map(|((sum, distance), y)| LadderPoint {
            distance,
            estimate: MomentEstimate::from_summary(s.value(), z, ladder.source.clone(), y.clone(), sum, master_seed),
        })
        .collect())
}

/// Points `(distance, mean)` of a ladder.
pub fn ladder_points<T: Real>(ladder: &[LadderPoint<T>]) -> Vec<(T, T)> {
    ladder.iter().map(|p| (p.distance, p.estimate.mean)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ConsistencyReport<T: Real> {
    pub criterion: CriterionReport<T>,
    pub ladder: Vec<LadderPoint<T>>,
    pub fit: DecayFit<T>,
    #[serde(with = "unbounded", default)]
    pub predicted_rate: Option<T>,
    /// `mu / predicted_rate`, recorded without any tolerance.
    pub rate_ratio: Option<T>,
    pub r2_threshold: T,
    pub consistent: bool,
}

/// Fits the moment decay along `ladder` once the criterion holds and compares
/// the fitted rate with `γ / 2L`. The verdict is `μ > 0` with `r² ≥ r2_threshold`.
#[allow(clippy::too_many_arguments)]
pub fn verify_criterion_consistency<T, E>(
    ensemble: &E,
    criterion: &CriterionReport<T>,
    z: SpectralShift<T>,
    ladder: &DistanceLadder<T>,
    n: usize,
    master_seed: u64,
    r2_threshold: T,
    opts: SolverOptions<T>,
    workers: &Workers,
) -> Result<ConsistencyReport<T>>
where
    T: Real,
    E: Ensemble<T> + ?Sized,
{
    if !criterion.satisfied() {
        return Err(Error::CriterionNotSatisfied(criterion.factor.as_f64()));
    }
    let s = FractionalExponent::new(criterion.s)?;
    let points = moment_ladder(ensemble, s, z, ladder, n, master_seed, opts, workers)?;
    let fit = fit_exponential_decay(&ladder_points(&points))?;
    let rate_ratio = criterion
        .predicted_rate
        .filter(|r| r.is_finite() && *r > T::zero())
        .map(|r| fit.mu / r);
    let consistent = fit.mu > T::zero() && fit.r2 >= r2_threshold;
    Ok(ConsistencyReport {
        criterion: *criterion,
        ladder: points,
        fit,
        predicted_rate: criterion.predicted_rate,
        rate_ratio,
        r2_threshold,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BackgroundFields, DisorderLaw, SingleSiteProfile};
    use rand::{Rng, SeedableRng};

    fn report(s: f64, lambda: f64, e: f64, l: f64, d: usize, raw: f64, pre: MomentPrefactor<f64>) -> Result<CriterionReport<f64>> {
        criterion_factor(&CriterionParams {
            s,
            lambda,
            energy: e,
            e0: 0.0,
            l,
            r: 1.0,
            d,
            raw_moment: raw,
            prefactor: pre,
        })
    }

    #[test]
    fn modified_distance_examples() {
        let g = GridSpec::new(vec![10.0], 0.5).unwrap();
        let full = DomainMask::full(g.len());
        assert_eq!(modified_distance(&[1.0], &[9.0], &full, &g).unwrap(), 2.0);
        assert_eq!(modified_distance(&[4.0], &[4.0], &full, &g).unwrap(), 0.0);
        assert_eq!(modified_distance(&[4.0], &[6.0], &full, &g).unwrap(), 2.0);
        assert!(modified_distance(&[-1.0], &[6.0], &full, &g).is_err());
        let g2 = GridSpec::new(vec![100.0, 100.0], 1.0).unwrap();
        let full2 = DomainMask::full(g2.len());
        let d = modified_distance(&[40.0, 50.0], &[43.0, 54.0], &full2, &g2).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn inactive_points_count_as_complement() {
        let g = GridSpec::new(vec![20.0], 1.0).unwrap();
        let mask = DomainMask::from_predicate(g.len(), |i| g.coords(i)[0] != 10.0);
        let md = ModifiedDistance::new(&g, &mask).unwrap();
        assert_eq!(md.to_complement(&[8.0]).unwrap(), 2.0);
        assert_eq!(md.distance(&[8.0], &[12.0]).unwrap(), 4.0);
        assert_eq!(md.distance(&[9.0], &[11.0]).unwrap(), 2.0);
        assert!(md.distance(&[10.0], &[12.0]).is_err());
    }

    #[test]
    fn lemma1_examples() {
        assert!((lemma1_bound(0.5f64, 1.0, 0.0, 0.0, 1, 1.0).unwrap() - 8.0).abs() < 1e-14);
        let near = lemma1_bound(0.999, 1.0, 0.0, 0.0, 1, 1.0).unwrap();
        let nearer = lemma1_bound(0.9999, 1.0, 0.0, 0.0, 1, 1.0).unwrap();
        assert!(nearer > near && near > 1e3);
        assert!(lemma1_bound(1.0, 1.0, 0.0, 0.0, 1, 1.0).is_err());
        let e_factor = lemma1_bound(0.5, 1.0, 3.0, 0.0, 2, 1.0).unwrap() / lemma1_bound(0.5, 1.0, 0.0, 0.0, 2, 1.0).unwrap();
        assert!((e_factor - 4f64.powf(2.0)).abs() < 1e-12);
    }

    #[test]
    fn criterion_examples() {
        let r = report(0.2, 1.0, 0.0, 30.0, 1, 0.5, MomentPrefactor::Explicit { value: 1.0 }).unwrap();
        assert!((r.factor - 2f64.powf(0.4) * 0.5).abs() < 1e-15);
        assert!((2f64.powf(0.4) - 1.3195).abs() < 1e-4);
        let r = report(0.2, 1.0, 0.0, 30.0, 1, 0.0, MomentPrefactor::default()).unwrap();
        assert_eq!(r.factor, 0.0);
        assert_eq!(r.gamma, Some(f64::INFINITY));
        let v = serde_json::to_value(r).unwrap();
        assert_eq!(v["gamma"], "inf");
        let back: CriterionReport<f64> = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
        assert!(report(1.0 / 3.0, 1.0, 0.0, 30.0, 1, 0.1, MomentPrefactor::default()).is_err());
        assert!(report(0.2, 1.0, 0.0, 24.0, 1, 0.1, MomentPrefactor::default()).is_err());
        let formula = report(0.2, 1.0, 0.0, 30.0, 1, 1.0, MomentPrefactor::default()).unwrap();
        assert!((formula.m - 2f64.powi(5) / 0.4).abs() < 1e-12);
    }

    #[test]
    fn gamma_and_rate() {
        let r = report(0.2, 1.0, 0.0, 30.0, 1, 0.25, MomentPrefactor::Explicit { value: 1.0 }).unwrap();
        let g = -(r.factor).ln();
        assert_eq!(r.gamma, Some(g));
        assert_eq!(r.predicted_rate, Some(g / 60.0));
        let big = report(0.2, 1.0, 0.0, 30.0, 1, 10.0, MomentPrefactor::Explicit { value: 1.0 }).unwrap();
        assert!(big.gamma.is_none() && big.predicted_rate.is_none());
    }

    #[test]
    fn criterion_monotonicity() {
        let p = MomentPrefactor::default();
        let base = report(0.2, 2.0, 1.0, 30.0, 2, 1e-3, p).unwrap().factor;
        assert!(report(0.2, 2.0, 1.0, 30.0, 2, 2e-3, p).unwrap().factor > base);
        assert!(report(0.2, 2.0, 1.0, 31.0, 2, 1e-3, p).unwrap().factor > base);
        assert!(report(0.2, 2.0, 1.5, 30.0, 2, 1e-3, p).unwrap().factor > base);
        let d1a = report(0.2, 2.0, 1.0, 30.0, 1, 1e-3, p).unwrap().factor;
        let d1b = report(0.2, 2.0, 1.0, 40.0, 1, 1e-3, p).unwrap().factor;
        assert_eq!(d1a, d1b);
        let a = report(0.33, 2.0, 1.0, 30.0, 1, 1e-3, p).unwrap().factor;
        let b = report(0.3333, 2.0, 1.0, 30.0, 1, 1e-3, p).unwrap().factor;
        assert!(b > a);
    }

    #[test]
    fn exact_fit_recovery() {
        let pts: Vec<(f64, f64)> = (0..6).map(|k| (k as f64, 5.0 * (-0.7 * k as f64).exp())).collect();
        let fit = fit_exponential_decay(&pts).unwrap();
        assert!((fit.amplitude - 5.0).abs() < 1e-12);
        assert!((fit.mu - 0.7).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_and_degenerate_fits() {
        let fit = fit_exponential_decay(&[(1.0, 2.0), (2.0, 2.0), (3.0, 2.0)]).unwrap();
        assert_eq!(fit.mu, 0.0);
        assert_eq!(fit.r2, 0.0);
        assert!(fit_exponential_decay(&[(1.0, 2.0), (2.0, 2.0)]).is_err());
        assert!(fit_exponential_decay(&[(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)]).is_err());
        assert!(fit_exponential_decay(&[(1.0, 2.0), (2.0, 0.0), (3.0, 4.0)]).is_err());
    }

    #[test]
    fn noisy_fit_recovers_rate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|k| {
                let d = k as f64;
                let noise = 1.0 + 0.05 * (2.0 * rng.gen::<f64>() - 1.0);
                (d, 3.0 * (-0.4 * d).exp() * noise)
            })
            .collect();
        let fit = fit_exponential_decay(&pts).unwrap();
        assert!((fit.mu - 0.4).abs() < 0.04, "{}", fit.mu);
        let err: Vec<f64> = pts.iter().map(|p| 0.05 * p.1).collect();
        let wfit = fit_exponential_decay_weighted(&pts, &err).unwrap();
        assert!((wfit.mu - 0.4).abs() < 0.04);
    }

    fn chain_ensemble(l: f64, lambda: f64) -> ModelEnsemble<f64> {
        let g = GridSpec::new(vec![l], 0.5).unwrap();
        let law = DisorderLaw::uniform_on(&g, lambda).unwrap();
        ModelEnsemble::new(g, &BackgroundFields::free(), SingleSiteProfile::indicator(1.0), law).unwrap()
    }

    #[test]
    fn deterministic_boundary_moment_is_translation_invariant() {
        let ens = chain_ensemble(70.0, 0.0);
        let layer = BoundaryLayer::new(26.0, 1.0).unwrap();
        let sched = EpsilonSchedule::geometric(0.1, 0.1, 2).unwrap();
        let s = FractionalExponent::new(0.3).unwrap();
        let alphas = vec![vec![30.0], vec![34.0], vec![40.0]];
        let raw = estimate_raw_boundary_moment(&ens, s, -2.0, layer, &sched, &alphas, 3, 1, SolverOptions::default(), &Workers::serial()).unwrap();
        let m: Vec<f64> = (0..3).map(|k| raw.estimate(k).mean).collect();
        for v in &m {
            assert!((v - m[0]).abs() < 1e-9 * m[0]);
            assert_eq!(raw.estimate(0).stderr, 0.0);
        }
        assert!(raw.warnings.is_empty());
        let single = estimate_raw_boundary_moment(&ens, s, -2.0, layer, &sched, &alphas[..1], 3, 1, SolverOptions::default(), &Workers::serial()).unwrap();
        assert_eq!(single.value, m[0]);
        assert!(estimate_raw_boundary_moment(&ens, s, -2.0, layer, &sched, &[vec![20.0]], 3, 1, SolverOptions::default(), &Workers::serial()).is_err());
    }

    #[test]
    fn refuses_when_criterion_fails() {
        let ens = chain_ensemble(20.0, 0.01);
        let rep = report(0.2, 0.01, 2.0, 30.0, 1, 0.5, MomentPrefactor::default()).unwrap();
        assert!(!rep.satisfied());
        let ladder = DistanceLadder::along_first_axis(vec![5.0], &[2.0, 4.0, 6.0], 1.0);
        let z = SpectralShift::new(2.0, 1e-3).unwrap();
        let err = verify_criterion_consistency(&ens, &rep, z, &ladder, 4, 0, 0.8, SolverOptions::default(), &Workers::serial());
        assert!(matches!(err, Err(Error::CriterionNotSatisfied(_))));
    }

    #[test]
    fn ladder_shares_factorization() {
        let ens = chain_ensemble(30.0, 5.0);
        let ladder = DistanceLadder::along_first_axis(vec![6.0], &[3.0, 6.0, 9.0], 1.0);
        let z = SpectralShift::new(1.0, 1e-2).unwrap();
        let s = FractionalExponent::new(0.3).unwrap();
        let pts = moment_ladder(&ens, s, z, &ladder, 6, 9, SolverOptions::default(), &Workers::serial()).unwrap();
        assert_eq!(pts.iter().map(|p| p.distance).collect::<Vec<_>>(), vec![3.0, 6.0, 9.0]);
        let g = ens.grid().clone();
        let x = IndicatorSet::ball(&g, &[6.0], 1.0);
        let y = IndicatorSet::ball(&g, &[12.0], 1.0);
        let h = ens.realize(derive_sample_seed(9, 2)).unwrap();
        let direct = block_operator_norm(&h, z, &x, &y, SolverOptions::default()).unwrap();
        let shared = block_norms_from_source(&h, z, &x, &[y], SolverOptions::default()).unwrap()[0];
        assert!((direct - shared).abs() < 1e-10 * direct);
    }
}
