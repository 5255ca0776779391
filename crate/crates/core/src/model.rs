//! Discretized random Schrödinger operators `H0 + lambda V` on boxes with
//! Dirichlet boundary conditions.
//!
//! The continuum box `[0, L_1] x ... x [0, L_d]` is sampled at the interior
//! points `q = (k + 1) h`, `k = 0..n_i`, with `n_i = L_i / h - 1`. Couplings
//! live on the integer lattice points of the closed box.

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::band::inertia_below;
use crate::linalg::sparse::CsrMatrix;
use crate::scalar::{cx, Cx, Real};

/// Integer lattice site; unused trailing axes are zero.
pub type Site = [i64; 3];

/// Uniform Cartesian grid on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T: Real> {
    extents: Vec<T>,
    spacing: T,
    counts: Vec<usize>,
}

impl<T: Real> GridSpec<T> {
    pub fn new(extents: Vec<T>, spacing: T) -> Result<Self> {
        let d = extents.len();
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing {spacing} must be positive")));
        }
        let mut counts = Vec::with_capacity(d);
        for (axis, &l) in extents.iter().enumerate() {
            let ratio = l / spacing;
            let rounded = ratio.round();
            if !ratio.is_finite() || (ratio - rounded).abs() > T::lit(1e-9) * rounded.max(T::one()) {
                return Err(Error::InvalidGrid(format!(
                    "extent {l} on axis {axis} is not an integer multiple of h = {spacing}"
                )));
            }
            let cells = rounded.to_usize().unwrap_or(0);
            if cells < 4 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has {} interior points, need at least 3",
                    cells.saturating_sub(1)
                )));
            }
            counts.push(cells - 1);
        }
        Ok(Self {
            extents,
            spacing,
            counts,
        })
    }

    /// Unit-spaced chain of `n` points used for operators given directly as
    /// matrices. Bypasses the three-points-per-axis rule.
    pub fn abstract_chain(n: usize) -> Self {
        Self {
            extents: vec![T::from_usize_lossy(n + 1)],
            spacing: T::one(),
            counts: vec![n],
        }
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn extents(&self) -> &[T] {
        &self.extents
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of interior grid points.
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Continuum volume of the box.
    pub fn volume(&self) -> T {
        self.extents.iter().fold(T::one(), |acc, &l| acc * l)
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for (axis, &n) in self.counts.iter().enumerate() {
            out[axis] = idx % n;
            idx /= n;
        }
        out
    }

    pub fn linear_index(&self, k: &[usize]) -> usize {
        let mut idx = 0;
        for axis in (0..self.dim()).rev() {
            idx = idx * self.counts[axis] + k[axis];
        }
        idx
    }

    pub fn coords(&self, idx: usize) -> Vec<T> {
        let k = self.multi_index(idx);
        (0..self.dim())
            .map(|a| T::from_usize_lossy(k[a] + 1) * self.spacing)
            .collect()
    }

    /// Grid index nearest to a continuum point, if it is an interior point.
    pub fn nearest_index(&self, point: &[T]) -> Option<usize> {
        if point.len() != self.dim() {
            return None;
        }
        let mut k = [0usize; 3];
        for a in 0..self.dim() {
            let raw = (point[a] / self.spacing).round() - T::one();
            if raw < T::zero() {
                return None;
            }
            let ka = raw.to_usize()?;
            if ka >= self.counts[a] {
                return None;
            }
            k[a] = ka;
        }
        Some(self.linear_index(&k))
    }

    /// Distance from `point` to the exterior of the box.
    pub fn distance_to_box_exterior(&self, point: &[T]) -> T {
        point
            .iter()
            .zip(&self.extents)
            .map(|(&x, &l)| x.min(l - x))
            .fold(T::infinity(), T::min)
    }

    pub fn contains_open(&self, point: &[T]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.extents)
                .all(|(&x, &l)| x > T::zero() && x < l)
    }

    /// Forward neighbours `(axis, neighbour index)` of a grid point.
    pub fn forward_neighbors(&self, idx: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let k = self.multi_index(idx);
        let mut stride = 1;
        let mut out = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            if k[axis] + 1 < self.counts[axis] {
                out.push((axis, idx + stride));
            }
            stride *= self.counts[axis];
        }
        out.into_iter()
    }

    /// Integer lattice points of the closed box (the index set of couplings).
    pub fn site_lattice(&self) -> Vec<Site> {
        let upper: Vec<i64> = self
            .extents
            .iter()
            .map(|l| l.floor().to_i64().unwrap_or(0))
            .collect();
        let mut sites = Vec::new();
        let u = |a: usize| if a < upper.len() { upper[a] } else { 0 };
        for z in 0..=u(2) {
            for y in 0..=u(1) {
                for x in 0..=u(0) {
                    sites.push([x, y, z]);
                }
            }
        }
        sites
    }

    /// Grid points strictly inside the open ball `|q - center| < radius`.
    pub fn points_in_ball(&self, center: &[T], radius: T) -> Vec<usize> {
        self.points_in_shell(center, T::neg_infinity(), radius)
    }

    /// Grid points with `inner < |q - center| < outer`, in ascending order.
    pub fn points_in_shell(&self, center: &[T], inner: T, outer: T) -> Vec<usize> {
        let d = self.dim();
        let h = self.spacing;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..d {
            let kmin = ((center[a] - outer) / h - T::one()).floor().max(T::zero());
            let kmax = ((center[a] + outer) / h - T::one()).ceil();
            lo[a] = kmin.to_usize().unwrap_or(0);
            let top = T::from_usize_lossy(self.counts[a] - 1);
            hi[a] = kmax.min(top).max(T::zero()).to_usize().unwrap_or(0);
            if kmax < T::zero() || lo[a] > hi[a] {
                return Vec::new();
            }
        }
        let mut out = Vec::new();
        let range = |a: usize| if a < d { lo[a]..=hi[a] } else { 0..=0 };
        for k2 in range(2) {
            for k1 in range(1) {
                for k0 in range(0) {
                    let k = [k0, k1, k2];
                    let mut r2 = T::zero();
                    for a in 0..d {
                        let q = T::from_usize_lossy(k[a] + 1) * h;
                        r2 += (q - center[a]) * (q - center[a]);
                    }
                    let r = r2.sqrt();
                    if r > inner && r < outer {
                        out.push(self.linear_index(&k));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

type VectorField<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
type ScalarField<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Deterministic magnetic vector potential and electric potential.
#[derive(Clone)]
pub struct BackgroundFields<T: Real> {
    vector_potential: Option<VectorField<T>>,
    potential: Option<ScalarField<T>>,
    v0_min: T,
}

impl<T: Real> std::fmt::Debug for BackgroundFields<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackgroundFields")
            .field("magnetic", &self.vector_potential.is_some())
            .field("electric", &self.potential.is_some())
            .field("v0_min", &self.v0_min)
            .finish()
    }
}

impl<T: Real> Default for BackgroundFields<T> {
    fn default() -> Self {
        Self::free()
    }
}

impl<T: Real> BackgroundFields<T> {
    /// `A = 0`, `V0 = 0`.
    pub fn free() -> Self {
        Self {
            vector_potential: None,
            potential: None,
            v0_min: T::zero(),
        }
    }

    pub fn with_potential(
        mut self,
        v0: impl Fn(&[T]) -> T + Send + Sync + 'static,
        v0_min: T,
    ) -> Self {
        self.potential = Some(Arc::new(v0));
        self.v0_min = v0_min;
        self
    }

    pub fn constant_potential(self, c: T) -> Self {
        self.with_potential(move |_| c, c)
    }

    pub fn with_vector_potential(
        mut self,
        a: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        self.vector_potential = Some(Arc::new(a));
        self
    }

    /// Constant field `b` along the third axis in symmetric gauge about
    /// `origin`: `A = (-b (y - y0) / 2, b (x - x0) / 2, 0)`.
    pub fn uniform_magnetic_field(self, b: T, origin: Vec<T>) -> Self {
        let half = T::lit(0.5);
        self.with_vector_potential(move |q| {
            let (x0, y0) = (origin.first().copied().unwrap_or_default(), origin.get(1).copied().unwrap_or_default());
            let x = q.first().copied().unwrap_or_default() - x0;
            let y = q.get(1).copied().unwrap_or_default() - y0;
            let mut a = vec![T::zero(); q.len()];
            if !a.is_empty() {
                a[0] = -b * y * half;
            }
            if a.len() > 1 {
                a[1] = b * x * half;
            }
            a
        })
    }

    pub fn v0_min(&self) -> T {
        self.v0_min
    }

    pub fn has_magnetic_field(&self) -> bool {
        self.vector_potential.is_some()
    }

    pub fn potential_at(&self, q: &[T]) -> T {
        self.potential.as_ref().map_or(T::zero(), |f| f(q))
    }

    pub fn vector_potential_at(&self, q: &[T]) -> Vec<T> {
        self.vector_potential
            .as_ref()
            .map_or_else(|| vec![T::zero(); q.len()], |f| f(q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpShape {
    Indicator,
    CosineBump,
}

/// Radial single-site bump `U`, supported in the open ball of radius `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleSiteProfile<T: Real> {
    radius: T,
    shape: BumpShape,
    amplitude: T,
}

impl<T: Real> SingleSiteProfile<T> {
    pub fn new(radius: T, shape: BumpShape, amplitude: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidProfile(format!("radius {radius} must be positive")));
        }
        if !(amplitude > T::zero()) || !amplitude.is_finite() {
            return Err(Error::InvalidProfile(format!("amplitude {amplitude} must be positive")));
        }
        Ok(Self {
            radius,
            shape,
            amplitude,
        })
    }

    pub fn indicator(radius: T) -> Self {
        Self::new(radius, BumpShape::Indicator, T::one()).expect("valid indicator")
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn shape(&self) -> BumpShape {
        self.shape
    }

    /// `U` at distance `dist` from the site.
    pub fn value_at_distance(&self, dist: T) -> T {
        if dist >= self.radius {
            return T::zero();
        }
        match self.shape {
            BumpShape::Indicator => self.amplitude,
            BumpShape::CosineBump => {
                let arg = T::PI() * dist / self.radius;
                self.amplitude * (T::one() + arg.cos()) * T::lit(0.5)
            }
        }
    }

    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(self.radius, self.shape, self.amplitude * c)
    }
}

/// Density of the couplings on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingDensity<T: Real> {
    Uniform,
    /// Piecewise-linear density through equally spaced nodes on `[0, 1]`,
    /// with its cumulative distribution at the nodes.
    Tabulated { values: Vec<T>, cdf: Vec<T> },
}

impl<T: Real> CouplingDensity<T> {
    /// Builds a tabulated density; trapezoid integral must be 1 within 1e-10.
    pub fn tabulated(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidDensity("need at least two nodes".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidDensity("values must be finite and nonnegative".into()));
        }
        let step = T::one() / T::from_usize_lossy(values.len() - 1);
        let mut cdf = vec![T::zero(); values.len()];
        for i in 1..values.len() {
            cdf[i] = cdf[i - 1] + (values[i - 1] + values[i]) * step * T::lit(0.5);
        }
        let total = cdf[values.len() - 1];
        if (total - T::one()).abs() > T::lit(1e-10) {
            return Err(Error::InvalidDensity(format!("density integrates to {total}, not 1")));
        }
        Ok(Self::Tabulated { values, cdf })
    }

    pub fn pdf(&self, eta: T) -> T {
        if eta < T::zero() || eta > T::one() {
            return T::zero();
        }
        match self {
            Self::Uniform => T::one(),
            Self::Tabulated { values, .. } => {
                let cells = values.len() - 1;
                let pos = eta * T::from_usize_lossy(cells);
                let i = pos.floor().to_usize().unwrap_or(0).min(cells - 1);
                let frac = pos - T::from_usize_lossy(i);
                values[i] * (T::one() - frac) + values[i + 1] * frac
            }
        }
    }

    /// Maps a uniform variate `u` in `[0, 1)` to a coupling in `[0, 1]`.
    pub fn inverse_cdf(&self, u: T) -> T {
        match self {
            Self::Uniform => u,
            Self::Tabulated { values, cdf } => {
                let cells = values.len() - 1;
                let step = T::one() / T::from_usize_lossy(cells);
                let i = match cdf.iter().position(|&c| c > u) {
                    Some(0) => 0,
                    Some(k) => k - 1,
                    None => cells - 1,
                };
                let i = i.min(cells - 1);
                // density a + b t on t in [0, step]: a t + b t^2 / 2 = target
                let a = values[i];
                let b = (values[i + 1] - values[i]) / step;
                let target = u - cdf[i];
                let t = if b.abs() <= T::epsilon() * a.max(T::one()) {
                    if a > T::zero() {
                        target / a
                    } else {
                        T::zero()
                    }
                } else {
                    let disc = (a * a + T::lit(2.0) * b * target).max(T::zero());
                    T::lit(2.0) * target / (a + disc.sqrt()).max(T::min_positive_value())
                };
                (T::from_usize_lossy(i) * step + t.min(step).max(T::zero())).min(T::one())
            }
        }
    }
}

/// Disorder strength, coupling density and the index set of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderLaw<T: Real> {
    pub lambda: T,
    pub density: CouplingDensity<T>,
    pub sites: Vec<Site>,
}

impl<T: Real> DisorderLaw<T> {
    pub fn new(lambda: T, density: CouplingDensity<T>, sites: Vec<Site>) -> Result<Self> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda = {lambda} must be >= 0")));
        }
        Ok(Self {
            lambda,
            density,
            sites,
        })
    }

    /// Uniform couplings on the integer points of the grid's box.
    pub fn uniform_on(grid: &GridSpec<T>, lambda: T) -> Result<Self> {
        Self::new(lambda, CouplingDensity::Uniform, grid.site_lattice())
    }
}

/// One sample of the iid couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization<T: Real> {
    pub seed: u64,
    pub sites: Vec<Site>,
    pub eta: Vec<T>,
}

fn site_stream(site: &Site) -> u64 {
    // 21 bits per axis, offset so negative coordinates stay distinct
    let enc = |v: i64| ((v + (1 << 20)) as u64) & 0x1f_ffff;
    enc(site[0]) | (enc(site[1]) << 21) | (enc(site[2]) << 42)
}

/// Uniform variate for `site` under `seed`; independent of enumeration order.
fn site_uniform(seed: u64, site: &Site) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(site_stream(site));
    rng.gen::<f64>()
}

/// Draws `eta_alpha` for every site of the law from `seed`.
pub fn sample_couplings<T: Real>(law: &DisorderLaw<T>, seed: u64) -> DisorderRealization<T> {
    let eta = law
        .sites
        .iter()
        .map(|s| law.density.inverse_cdf(T::lit(site_uniform(seed, s))))
        .collect();
    DisorderRealization {
        seed,
        sites: law.sites.clone(),
        eta,
    }
}

/// Derives the seed of sample `index` from a master seed.
pub fn derive_sample_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.gen::<u64>()
}

/// Per-site bump contributions `(grid index, U(q - alpha))`.
#[derive(Debug, Clone)]
pub struct PotentialBasis<T: Real> {
    grid_len: usize,
    per_site: Vec<Vec<(usize, T)>>,
}

impl<T: Real> PotentialBasis<T> {
    pub fn new(profile: &SingleSiteProfile<T>, sites: &[Site], grid: &GridSpec<T>) -> Self {
        let d = grid.dim();
        let per_site = sites
            .iter()
            .map(|s| {
                let center: Vec<T> = (0..d).map(|a| T::from_i64(s[a]).expect("site coordinate")).collect();
                grid.points_in_ball(&center, profile.radius())
                    .into_iter()
                    .filter_map(|q| {
                        let coords = grid.coords(q);
                        let dist = coords
                            .iter()
                            .zip(&center)
                            .map(|(&a, &b)| (a - b) * (a - b))
                            .sum::<T>()
                            .sqrt();
                        let u = profile.value_at_distance(dist);
                        (u > T::zero()).then_some((q, u))
                    })
                    .collect()
            })
            .collect();
        Self {
            grid_len: grid.len(),
            per_site,
        }
    }

    /// `sum_alpha coeff_alpha U(q - alpha)` at every grid point.
    pub fn combine(&self, coeff: &[T]) -> Vec<T> {
        let mut v = vec![T::zero(); self.grid_len];
        for (terms, &c) in self.per_site.iter().zip(coeff) {
            if c == T::zero() {
                continue;
            }
            for &(q, u) in terms {
                v[q] += c * u;
            }
        }
        v
    }
}

/// `(b_minus, b_plus)`: extreme values of `sum_alpha U(q - alpha)` over the grid.
pub fn check_covering<T: Real>(
    profile: &SingleSiteProfile<T>,
    law: &DisorderLaw<T>,
    grid: &GridSpec<T>,
) -> Result<(T, T)> {
    if law.sites.is_empty() {
        return Err(Error::LatticeMismatch("site lattice is empty".into()));
    }
    let basis = PotentialBasis::new(profile, &law.sites, grid);
    let total = basis.combine(&vec![T::one(); law.sites.len()]);
    let (mut lo, mut hi) = (T::infinity(), T::zero());
    let mut worst = 0;
    for (q, &v) in total.iter().enumerate() {
        if v < lo {
            lo = v;
            worst = q;
        }
        hi = hi.max(v);
    }
    if lo <= T::zero() {
        return Err(Error::CoveringViolation {
            index: worst,
            coords: grid.coords(worst).iter().map(|c| c.as_f64()).collect(),
        });
    }
    Ok((lo, hi))
}

/// `V(q) = sum_alpha eta_alpha U(q - alpha)` at every grid point.
pub fn realize_potential<T: Real>(
    rz: &DisorderRealization<T>,
    profile: &SingleSiteProfile<T>,
    law: &DisorderLaw<T>,
    grid: &GridSpec<T>,
) -> Result<Vec<T>> {
    if rz.sites != law.sites || rz.eta.len() != rz.sites.len() {
        return Err(Error::LatticeMismatch(format!(
            "realization has {} sites, law has {}",
            rz.sites.len(),
            law.sites.len()
        )));
    }
    Ok(PotentialBasis::new(profile, &law.sites, grid).combine(&rz.eta))
}

/// Active-site set over the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainMask {
    active: Vec<bool>,
}

impl DomainMask {
    pub fn full(len: usize) -> Self {
        Self {
            active: vec![true; len],
        }
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut active = vec![false; len];
        for &i in indices {
            active[i] = true;
        }
        Self { active }
    }

    pub fn from_predicate(len: usize, f: impl Fn(usize) -> bool) -> Self {
        Self {
            active: (0..len).map(f).collect(),
        }
    }

    /// Open ball `|q - center| < radius` on the grid.
    pub fn ball<T: Real>(grid: &GridSpec<T>, center: &[T], radius: T) -> Self {
        Self::from_indices(grid.len(), &grid.points_in_ball(center, radius))
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.active.get(i).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&i| self.active[i]).collect()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.active.len() == other.active.len()
            && self.active.iter().zip(&other.active).all(|(&a, &b)| !a || b)
    }
}

/// Hermitian nearest-neighbour operator on the active sites of a grid.
#[derive(Debug, Clone)]
pub struct DiscreteHamiltonian<T: Real> {
    grid: GridSpec<T>,
    sites: Vec<usize>,
    local: Vec<usize>,
    matrix: CsrMatrix<T>,
    e0: OnceLock<T>,
}

const INACTIVE: usize = usize::MAX;

impl<T: Real> DiscreteHamiltonian<T> {
    fn from_parts(grid: GridSpec<T>, sites: Vec<usize>, matrix: CsrMatrix<T>) -> Self {
        let mut local = vec![INACTIVE; grid.len()];
        for (k, &s) in sites.iter().enumerate() {
            local[s] = k;
        }
        Self {
            grid,
            sites,
            local,
            matrix,
            e0: OnceLock::new(),
        }
    }

    /// Wraps an explicit Hermitian matrix on an abstract unit-spaced chain.
    pub fn from_matrix(matrix: CsrMatrix<T>) -> Result<Self> {
        if matrix.dim() == 0 {
            return Err(Error::EmptyMask);
        }
        if !matrix.is_hermitian() {
            return Err(Error::InvalidArgument("matrix is not Hermitian".into()));
        }
        let n = matrix.dim();
        Ok(Self::from_parts(GridSpec::abstract_chain(n), (0..n).collect(), matrix))
    }

    /// Real symmetric tridiagonal chain with the given diagonal and hopping.
    pub fn chain(diag: &[T], hopping: &[T]) -> Result<Self> {
        let n = diag.len();
        if hopping.len() + 1 != n {
            return Err(Error::ShapeMismatch {
                expected: n.saturating_sub(1),
                found: hopping.len(),
            });
        }
        let mut trip: Vec<_> = diag.iter().enumerate().map(|(i, &d)| (i, i, cx(d, T::zero()))).collect();
        for (i, &t) in hopping.iter().enumerate() {
            trip.push((i, i + 1, cx(t, T::zero())));
            trip.push((i + 1, i, cx(t, T::zero())));
        }
        Self::from_matrix(CsrMatrix::from_triplets(n, trip))
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    /// Grid indices of the active sites, ascending.
    pub fn active_sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn local_index(&self, grid_index: usize) -> Option<usize> {
        self.local.get(grid_index).copied().filter(|&k| k != INACTIVE)
    }

    pub fn mask(&self) -> DomainMask {
        DomainMask::from_indices(self.grid.len(), &self.sites)
    }

    pub fn site_coords(&self, local: usize) -> Vec<T> {
        self.grid.coords(self.sites[local])
    }

    pub fn is_hermitian(&self) -> bool {
        self.matrix.is_hermitian()
    }

    /// Cached ground energy, if already computed.
    pub fn cached_ground_energy(&self) -> Option<T> {
        self.e0.get().copied()
    }

    /// Nearest-neighbour pattern check against the grid.
    pub fn is_nearest_neighbor(&self) -> bool {
        let d = self.grid.dim();
        (0..self.dim()).all(|i| {
            let ki = self.grid.multi_index(self.sites[i]);
            self.matrix.row(i).all(|(j, _)| {
                let kj = self.grid.multi_index(self.sites[j]);
                let manhattan: usize = (0..d).map(|a| ki[a].abs_diff(kj[a])).sum();
                manhattan <= 1
            })
        })
    }
}

/// Finite-difference `H0 = (i grad - A)^2 + V0` on the full grid.
///
/// Diagonal `2d / h^2 + V0(q)`, hopping `-exp(i theta) / h^2` from `q` to
/// `q + h e_a` with `theta = h (A_a(q) + A_a(q + h e_a)) / 2`.
pub fn assemble_h0<T: Real>(grid: &GridSpec<T>, bg: &BackgroundFields<T>) -> Result<DiscreteHamiltonian<T>> {
    let n = grid.len();
    let h = grid.spacing();
    let inv_h2 = T::one() / (h * h);
    let kinetic = T::from_usize_lossy(2 * grid.dim()) * inv_h2;
    let coords: Vec<Vec<T>> = (0..n).map(|i| grid.coords(i)).collect();
    let to_f64 = |c: &[T]| c.iter().map(|x| x.as_f64()).collect::<Vec<_>>();

    let mut apot = Vec::with_capacity(if bg.has_magnetic_field() { n } else { 0 });
    if bg.has_magnetic_field() {
        for (i, q) in coords.iter().enumerate() {
            let a = bg.vector_potential_at(q);
            if a.len() != grid.dim() || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteField {
                    index: i,
                    coords: to_f64(q),
                });
            }
            apot.push(a);
        }
    }

    let mut trip = Vec::with_capacity(n * (1 + 2 * grid.dim()));
    for (i, q) in coords.iter().enumerate() {
        let v0 = bg.potential_at(q);
        if !v0.is_finite() {
            return Err(Error::NonFiniteField {
                index: i,
                coords: to_f64(q),
            });
        }
        if v0 < bg.v0_min() {
            return Err(Error::PotentialBelowMinimum {
                index: i,
                value: v0.as_f64(),
                min: bg.v0_min().as_f64(),
            });
        }
        trip.push((i, i, cx(kinetic + v0, T::zero())));
        for (axis, j) in grid.forward_neighbors(i) {
            let hop = if apot.is_empty() {
                cx(-inv_h2, T::zero())
            } else {
                let theta = h * (apot[i][axis] + apot[j][axis]) * T::lit(0.5);
                Cx::from_polar(inv_h2, theta) * cx(-T::one(), T::zero())
            };
            trip.push((i, j, hop));
            trip.push((j, i, hop.conj()));
        }
    }
    Ok(DiscreteHamiltonian::from_parts(
        grid.clone(),
        (0..n).collect(),
        CsrMatrix::from_triplets(n, trip),
    ))
}

/// `h0 + lambda diag(potential)`; `potential` is indexed by grid point.
pub fn assemble_hamiltonian<T: Real>(
    h0: &DiscreteHamiltonian<T>,
    potential: &[T],
    lambda: T,
) -> Result<DiscreteHamiltonian<T>> {
    if potential.len() != h0.grid.len() {
        return Err(Error::ShapeMismatch {
            expected: h0.grid.len(),
            found: potential.len(),
        });
    }
    if lambda == T::zero() {
        return Ok(h0.clone());
    }
    let diag: Vec<Cx<T>> = h0
        .sites
        .iter()
        .map(|&s| cx(lambda * potential[s], T::zero()))
        .collect();
    Ok(DiscreteHamiltonian::from_parts(
        h0.grid.clone(),
        h0.sites.clone(),
        h0.matrix.add_diagonal(&diag),
    ))
}

/// Principal submatrix on `mask`: the Dirichlet restriction to the domain.
pub fn restrict_dirichlet<T: Real>(h: &DiscreteHamiltonian<T>, mask: &DomainMask) -> Result<DiscreteHamiltonian<T>> {
    if mask.len() != h.grid.len() {
        return Err(Error::ShapeMismatch {
            expected: h.grid.len(),
            found: mask.len(),
        });
    }
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    if !mask.is_subset_of(&h.mask()) {
        return Err(Error::MaskNotSubset);
    }
    let sites = mask.indices();
    let keep: Vec<usize> = sites.iter().map(|&s| h.local[s]).collect();
    Ok(DiscreteHamiltonian::from_parts(
        h.grid.clone(),
        sites,
        h.matrix.principal_submatrix(&keep),
    ))
}

/// Bisection iteration limit for [`ground_energy`].
pub const GROUND_ENERGY_MAX_ITER: usize = 200;

/// Smallest eigenvalue by inertia bisection, relative tolerance 1e-10.
pub fn ground_energy<T: Real>(h: &DiscreteHamiltonian<T>) -> Result<T> {
    ground_energy_with_limit(h, GROUND_ENERGY_MAX_ITER)
}

pub fn ground_energy_with_limit<T: Real>(h: &DiscreteHamiltonian<T>, max_iter: usize) -> Result<T> {
    if let Some(&e0) = h.e0.get() {
        return Ok(e0);
    }
    let m = h.matrix();
    let e0 = if m.dim() == 1 {
        m.get(0, 0).re
    } else {
        let (mut lo, mut hi) = m.gershgorin_interval();
        let span = (hi - lo).max(T::min_positive_value());
        lo -= span * T::lit(1e-3);
        hi += span * T::lit(1e-3);
        let rel = T::lit(1e-10);
        let mut iter = 0;
        while hi - lo > rel * lo.abs().max(hi.abs()).max(span * T::lit(1e-6)) {
            if iter >= max_iter {
                return Err(Error::EigenNonConvergence(max_iter));
            }
            iter += 1;
            let mid = (lo + hi) * T::lit(0.5);
            if inertia_below(m, mid) == 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * T::lit(0.5)
    };
    Ok(*h.e0.get_or_init(|| e0))
}

/// Source of independent disorder samples.
pub trait Ensemble<T: Real>: Sync {
    /// Hamiltonian for one realization; a pure function of `seed`.
    fn realize(&self, seed: u64) -> Result<DiscreteHamiltonian<T>>;

    /// True when every seed yields the same operator.
    fn is_deterministic(&self) -> bool {
        false
    }
}

/// The full random model on a (possibly restricted) domain of a grid box.
#[derive(Debug, Clone)]
pub struct ModelEnsemble<T: Real> {
    grid: GridSpec<T>,
    profile: SingleSiteProfile<T>,
    law: DisorderLaw<T>,
    h0: DiscreteHamiltonian<T>,
    basis: PotentialBasis<T>,
}

impl<T: Real> ModelEnsemble<T> {
    pub fn new(
        grid: GridSpec<T>,
        bg: &BackgroundFields<T>,
        profile: SingleSiteProfile<T>,
        law: DisorderLaw<T>,
    ) -> Result<Self> {
        let h0 = assemble_h0(&grid, bg)?;
        let basis = PotentialBasis::new(&profile, &law.sites, &grid);
        Ok(Self {
            grid,
            profile,
            law,
            h0,
            basis,
        })
    }

    /// Same couplings, Dirichlet restriction of every realization to `mask`.
    pub fn restricted(&self, mask: &DomainMask) -> Result<Self> {
        let h0 = restrict_dirichlet(&self.h0, mask)?;
        Ok(Self {
            h0,
            ..self.clone()
        })
    }

    /// Restriction to the open ball `B(center, radius)`, which must lie in the box.
    pub fn restricted_to_ball(&self, center: &[T], radius: T) -> Result<Self> {
        let fits = center.len() == self.grid.dim()
            && center
                .iter()
                .zip(self.grid.extents())
                .all(|(&c, &l)| c - radius >= T::zero() && c + radius <= l);
        if !fits {
            return Err(Error::BallOutsideBox {
                center: center.iter().map(|c| c.as_f64()).collect(),
                radius: radius.as_f64(),
            });
        }
        self.restricted(&DomainMask::ball(&self.grid, center, radius))
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn law(&self) -> &DisorderLaw<T> {
        &self.law
    }

    pub fn profile(&self) -> &SingleSiteProfile<T> {
        &self.profile
    }

    /// Background operator on this ensemble's domain.
    pub fn background(&self) -> &DiscreteHamiltonian<T> {
        &self.h0
    }

    pub fn realization(&self, seed: u64) -> DisorderRealization<T> {
        sample_couplings(&self.law, seed)
    }

    pub fn potential(&self, rz: &DisorderRealization<T>) -> Vec<T> {
        self.basis.combine(&rz.eta)
    }
}

impl<T: Real> Ensemble<T> for ModelEnsemble<T> {
    fn realize(&self, seed: u64) -> Result<DiscreteHamiltonian<T>> {
        if self.law.lambda == T::zero() {
            return Ok(self.h0.clone());
        }
        let rz = self.realization(seed);
        assemble_hamiltonian(&self.h0, &self.potential(&rz), self.law.lambda)
    }

    fn is_deterministic(&self) -> bool {
        self.law.lambda == T::zero()
    }
}

/// One-site model `H = [lambda eta]`.
#[derive(Debug, Clone)]
pub struct SingleSiteEnsemble<T: Real> {
    law: DisorderLaw<T>,
}

impl<T: Real> SingleSiteEnsemble<T> {
    pub fn new(lambda: T, density: CouplingDensity<T>) -> Result<Self> {
        Ok(Self {
            law: DisorderLaw::new(lambda, density, vec![[0, 0, 0]])?,
        })
    }
}

impl<T: Real> Ensemble<T> for SingleSiteEnsemble<T> {
    fn realize(&self, seed: u64) -> Result<DiscreteHamiltonian<T>> {
        let rz = sample_couplings(&self.law, seed);
        let v = self.law.lambda * rz.eta[0];
        DiscreteHamiltonian::from_matrix(CsrMatrix::from_triplets(1, vec![(0, 0, cx(v, T::zero()))]))
    }

    fn is_deterministic(&self) -> bool {
        self.law.lambda == T::zero()
    }
}

impl<T: Real> Ensemble<T> for DiscreteHamiltonian<T> {
    fn realize(&self, _seed: u64) -> Result<DiscreteHamiltonian<T>> {
        Ok(self.clone())
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::hermitian_eigen;

    fn grid1(l: f64, h: f64) -> GridSpec<f64> {
        GridSpec::new(vec![l], h).unwrap()
    }

    fn dense_spectrum(h: &DiscreteHamiltonian<f64>) -> Vec<f64> {
        hermitian_eigen(&h.matrix().to_dense(), false).unwrap().values
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![1.0], 0.25).is_ok());
        assert!(matches!(GridSpec::new(vec![0.75], 0.25), Err(Error::InvalidGrid(_))));
        assert!(matches!(GridSpec::new(vec![1.1], 0.25), Err(Error::InvalidGrid(_))));
        assert!(matches!(GridSpec::new(vec![1.0], -0.1), Err(Error::InvalidGrid(_))));
        assert!(matches!(GridSpec::new(vec![1.0; 4], 0.25), Err(Error::InvalidGrid(_))));
        let g = GridSpec::new(vec![2.0, 1.0], 0.25).unwrap();
        assert_eq!(g.counts(), &[7, 3]);
        assert_eq!(g.coords(g.linear_index(&[2, 1])), vec![0.75, 0.5]);
        assert_eq!(g.nearest_index(&[0.75, 0.5]), Some(g.linear_index(&[2, 1])));
    }

    #[test]
    fn free_laplacian_closed_form() {
        let h = 0.5;
        let g = grid1(5.0, h);
        let n = g.len();
        let h0 = assemble_h0(&g, &BackgroundFields::free()).unwrap();
        let levels = dense_spectrum(&h0);
        for (k, &v) in levels.iter().enumerate() {
            let exact = 2.0 / (h * h) * (1.0 - ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos());
            assert!((v - exact).abs() < 1e-12, "k={k}");
            assert!(v >= 0.0 && v <= 4.0 / (h * h));
        }
        assert!(h0.matrix().is_real());
        assert!(h0.is_hermitian());
        assert!(h0.is_nearest_neighbor());
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let g = GridSpec::new(vec![2.0, 2.0], 0.5).unwrap();
        let bg = BackgroundFields::free().uniform_magnetic_field(0.7, vec![1.0, 1.0]);
        let a = dense_spectrum(&assemble_h0(&g, &bg).unwrap());
        let b = dense_spectrum(&assemble_h0(&g, &bg.clone().constant_potential(1.25)).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 1.25).abs() < 1e-12);
        }
    }

    #[test]
    fn magnetic_field_gives_complex_hermitian() {
        let g = GridSpec::new(vec![2.0, 2.0], 0.5).unwrap();
        let bg = BackgroundFields::free().uniform_magnetic_field(0.9, vec![0.0, 0.0]);
        let h0 = assemble_h0(&g, &bg).unwrap();
        assert!(h0.is_hermitian());
        assert!(!h0.matrix().is_real());
    }

    #[test]
    fn non_finite_field_names_point() {
        let g = grid1(2.0, 0.5);
        let bg = BackgroundFields::free().with_potential(|q: &[f64]| if q[0] == 1.0 { f64::NAN } else { 0.0 }, -1.0);
        match assemble_h0(&g, &bg) {
            Err(Error::NonFiniteField { index, coords }) => {
                assert_eq!(index, 1);
                assert_eq!(coords, vec![1.0]);
            }
            other => panic!("{other:?}"),
        }
        let below = BackgroundFields::free().with_potential(|_| -2.0, -1.0);
        assert!(matches!(assemble_h0(&g, &below), Err(Error::PotentialBelowMinimum { .. })));
    }

    #[test]
    fn covering_enumeration() {
        let g = grid1(4.0, 0.5);
        let law = DisorderLaw::uniform_on(&g, 1.0).unwrap();
        let p = SingleSiteProfile::indicator(1.0);
        assert_eq!(check_covering(&p, &law, &g).unwrap(), (1.0, 2.0));
        let p3 = p.scaled(3.0).unwrap();
        assert_eq!(check_covering(&p3, &law, &g).unwrap(), (3.0, 6.0));
        let thin = SingleSiteProfile::indicator(0.4);
        assert!(matches!(check_covering(&thin, &law, &g), Err(Error::CoveringViolation { .. })));
    }

    #[test]
    fn covering_holds_in_two_dimensions() {
        let g = GridSpec::new(vec![3.0, 3.0], 0.25).unwrap();
        let law = DisorderLaw::uniform_on(&g, 1.0).unwrap();
        let r = 2f64.sqrt() / 2.0 + 1e-9;
        let (lo, _) = check_covering(&SingleSiteProfile::indicator(r), &law, &g).unwrap();
        assert!(lo > 0.0);
    }

    #[test]
    fn couplings_are_deterministic_and_order_free() {
        let g = grid1(8.0, 0.5);
        let law = DisorderLaw::uniform_on(&g, 1.0).unwrap();
        let a = sample_couplings(&law, 42);
        assert_eq!(a, sample_couplings(&law, 42));
        assert!(a.eta.iter().all(|&e| (0.0..=1.0).contains(&e)));
        let mut reversed = law.clone();
        reversed.sites.reverse();
        let b = sample_couplings(&reversed, 42);
        for (s, e) in a.sites.iter().zip(&a.eta) {
            let k = b.sites.iter().position(|x| x == s).unwrap();
            assert_eq!(b.eta[k].to_bits(), e.to_bits());
        }
        let single = DisorderLaw::new(1.0, CouplingDensity::Uniform, vec![[0, 0, 0]]).unwrap();
        let one = sample_couplings(&single, 7);
        assert_eq!(one.eta.len(), 1);
        assert!((0.0..=1.0).contains(&one.eta[0]));
    }

    #[test]
    fn uniform_mean_law_of_large_numbers() {
        let law = DisorderLaw::<f64>::new(1.0, CouplingDensity::Uniform, (0..100_000).map(|i| [i, 0, 0]).collect()).unwrap();
        let rz = sample_couplings(&law, 2024);
        let n = rz.eta.len() as f64;
        let mean = rz.eta.iter().sum::<f64>() / n;
        let sigma = (1.0f64 / 12.0).sqrt() / n.sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean={mean}");
    }

    #[test]
    fn tabulated_density_normalization_and_sampling() {
        assert!(matches!(CouplingDensity::<f64>::tabulated(vec![1.0, 2.0]), Err(Error::InvalidDensity(_))));
        // triangular density 2 eta
        let d = CouplingDensity::tabulated(vec![0.0, 2.0]).unwrap();
        for &u in &[0.0, 0.01, 0.25, 0.5, 0.99] {
            let eta: f64 = d.inverse_cdf(u);
            assert!((eta * eta - u).abs() < 1e-12, "u={u}");
        }
        let law = DisorderLaw::new(1.0, d, (0..50_000).map(|i| [i, 0, 0]).collect()).unwrap();
        let rz = sample_couplings(&law, 5);
        let mean = rz.eta.iter().sum::<f64>() / rz.eta.len() as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn potential_pointwise_evaluation() {
        let g = grid1(4.0, 0.25);
        let law = DisorderLaw::new(1.0, CouplingDensity::Uniform, vec![[2, 0, 0]]).unwrap();
        let p = SingleSiteProfile::new(1.0, BumpShape::Indicator, 1.5).unwrap();
        let rz = DisorderRealization {
            seed: 0,
            sites: law.sites.clone(),
            eta: vec![0.6],
        };
        let v = realize_potential(&rz, &p, &law, &g).unwrap();
        for (i, &vi) in v.iter().enumerate() {
            let q = g.coords(i)[0];
            let expect = if (q - 2.0).abs() < 1.0 { 0.6 * 1.5 } else { 0.0 };
            assert_eq!(vi, expect, "q={q}");
        }
        let wrong = DisorderRealization {
            seed: 0,
            sites: vec![[0, 0, 0]],
            eta: vec![0.1],
        };
        assert!(matches!(realize_potential(&wrong, &p, &law, &g), Err(Error::LatticeMismatch(_))));
    }

    #[test]
    fn extreme_couplings() {
        let g = grid1(6.0, 0.25);
        let law = DisorderLaw::uniform_on(&g, 1.0).unwrap();
        let p = SingleSiteProfile::new(1.0, BumpShape::CosineBump, 1.0).unwrap();
        let (bm, bp) = check_covering(&p, &law, &g).unwrap();
        let mk = |v: f64| DisorderRealization {
            seed: 0,
            sites: law.sites.clone(),
            eta: vec![v; law.sites.len()],
        };
        assert!(realize_potential(&mk(0.0), &p, &law, &g).unwrap().iter().all(|&v| v == 0.0));
        let full = realize_potential(&mk(1.0), &p, &law, &g).unwrap();
        assert!(full.iter().all(|&v| v >= bm - 1e-15 && v <= bp + 1e-15));
    }

    #[test]
    fn hamiltonian_assembly_properties() {
        let g = grid1(6.0, 0.25);
        let bg = BackgroundFields::free();
        let h0 = assemble_h0(&g, &bg).unwrap();
        let law = DisorderLaw::uniform_on(&g, 3.0).unwrap();
        let p = SingleSiteProfile::indicator(1.0);
        let rz = sample_couplings(&law, 9);
        let v = realize_potential(&rz, &p, &law, &g).unwrap();
        let same = assemble_hamiltonian(&h0, &v, 0.0).unwrap();
        assert_eq!(same.matrix(), h0.matrix());
        let h = assemble_hamiltonian(&h0, &v, 3.0).unwrap();
        for (i, (a, b)) in h.matrix().diagonal().iter().zip(h0.matrix().diagonal()).enumerate() {
            // equal up to the rounding of the stored sum
            assert!((a.re - b.re - 3.0 * v[i]).abs() <= f64::EPSILON * a.re.abs());
        }
        assert!(h.is_hermitian());
        assert!(dense_spectrum(&h)[0] >= dense_spectrum(&h0)[0]);
        assert!(matches!(assemble_hamiltonian(&h0, &v[1..], 1.0), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn ensemble_matches_public_pipeline() {
        let g = grid1(6.0, 0.25);
        let bg = BackgroundFields::free();
        let law = DisorderLaw::uniform_on(&g, 2.0).unwrap();
        let p = SingleSiteProfile::indicator(1.0);
        let ens = ModelEnsemble::new(g.clone(), &bg, p, law.clone()).unwrap();
        let ball = ens.restricted_to_ball(&[3.0], 2.0).unwrap();
        let rz = sample_couplings(&law, 17);
        let v = realize_potential(&rz, &p, &law, &g).unwrap();
        let h = assemble_hamiltonian(&assemble_h0(&g, &bg).unwrap(), &v, 2.0).unwrap();
        let hr = restrict_dirichlet(&h, &DomainMask::ball(&g, &[3.0], 2.0)).unwrap();
        assert_eq!(ball.realize(17).unwrap().matrix(), hr.matrix());
        assert!(matches!(ens.restricted_to_ball(&[1.0], 2.0), Err(Error::BallOutsideBox { .. })));
    }

    #[test]
    fn restriction_cases() {
        let g = grid1(5.0, 0.5);
        let h0 = assemble_h0(&g, &BackgroundFields::free()).unwrap();
        let full = restrict_dirichlet(&h0, &DomainMask::full(g.len())).unwrap();
        assert_eq!(full.matrix(), h0.matrix());
        let half = DomainMask::from_predicate(g.len(), |i| i < 4);
        let r = restrict_dirichlet(&h0, &half).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(r.matrix().get(i, j), h0.matrix().get(i, j));
            }
        }
        assert!(ground_energy(&r).unwrap() >= ground_energy(&h0).unwrap());
        assert_eq!(restrict_dirichlet(&h0, &DomainMask::from_indices(g.len(), &[])).unwrap_err(), Error::EmptyMask);
        let other = DomainMask::from_predicate(g.len(), |i| i > 6);
        assert_eq!(restrict_dirichlet(&r, &other).unwrap_err(), Error::MaskNotSubset);
    }

    #[test]
    fn ground_energy_closed_form() {
        let g = grid1(4.0, 1.0);
        let h0 = assemble_h0(&g, &BackgroundFields::free()).unwrap();
        assert_eq!(h0.dim(), 3);
        assert!(h0.cached_ground_energy().is_none());
        let e0 = ground_energy(&h0).unwrap();
        let exact = 2.0 - 2f64.sqrt();
        assert!((e0 - exact).abs() <= 1e-8 * exact, "{e0}");
        assert_eq!(h0.cached_ground_energy(), Some(e0));
        let shifted = assemble_h0(&g, &BackgroundFields::free().constant_potential(3.0)).unwrap();
        assert!((ground_energy(&shifted).unwrap() - exact - 3.0).abs() < 1e-8);
        let one = DiscreteHamiltonian::chain(&[1.75], &[]).unwrap();
        assert_eq!(ground_energy(&one).unwrap(), 1.75);
        assert!(matches!(ground_energy_with_limit(&assemble_h0(&g, &BackgroundFields::free()).unwrap(), 2), Err(Error::EigenNonConvergence(2))));
    }
}
