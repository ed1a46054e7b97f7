//! Region sums, the multivariate quadratic form, the projected series and
//! its signal profile, and the grid-maximized test statistics.
//!
//! Index convention: component `i` of a change map covers the 1-based sample
//! indices `floor(N f(i)) + 1 ..= floor(N g(i))`. The signal profile at `t/N`
//! uses exactly the same integer comparison, so sums over regions and sums
//! weighted by the profile always agree.

use serde::{Deserialize, Serialize};

use crate::cov::CovModel;
use crate::error::{Error, Result};
use crate::geometry::{ChangeMap, ParamGrid, PlumeParams, TransectLayout};
use crate::par;

/// Data-generating truth attached to synthetic series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub mu: Vec<f64>,
    pub delta: Vec<f64>,
    pub params: PlumeParams,
}

/// `d` component series of common length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeries {
    components: Vec<Vec<f64>>,
    pub truth: Option<Truth>,
}

impl MultiSeries {
    pub fn new(components: Vec<Vec<f64>>) -> Result<Self> {
        let n = components
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("series has no components".into()))?;
        if n == 0 {
            return Err(Error::SeriesTooShort { needed: 1, got: 0 });
        }
        for (i, c) in components.iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.len(),
                });
            }
            if let Some(t) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    component: i,
                    index: t,
                });
            }
        }
        Ok(Self {
            components,
            truth: None,
        })
    }

    pub fn with_truth(mut self, truth: Truth) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn d(&self) -> usize {
        self.components.len()
    }

    pub fn n(&self) -> usize {
        self.components[0].len()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Observation vector at 0-based time index `t`.
    pub fn at(&self, t: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[t]).collect()
    }

    pub fn check_layout(&self, layout: &TransectLayout) -> Result<()> {
        if layout.d() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: layout.d(),
                got: self.d(),
            });
        }
        if layout.n != self.n() {
            return Err(Error::DimensionMismatch {
                expected: layout.n,
                got: self.n(),
            });
        }
        Ok(())
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `P(k) = sum_{t <= k} (x_t - mean(x))` for `k = 0..=n`.
pub fn centered_prefix(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    let mut out = Vec::with_capacity(x.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for v in x {
        acc += v - m;
        out.push(acc);
    }
    out
}

/// Centered sum of component `i` over its change region.
pub fn region_sum(series: &MultiSeries, cm: &ChangeMap, i: usize) -> f64 {
    let x = series.component(i);
    let (lo, hi) = cm.index_bounds(i, x.len());
    if hi <= lo {
        return 0.0;
    }
    let m = mean(x);
    x[lo..hi].iter().map(|v| v - m).sum()
}

/// `S^T Σ^{-1} S`.
pub fn multivariate_form(series: &MultiSeries, cm: &ChangeMap, cov: &CovModel) -> Result<f64> {
    check_dims(series.d(), cm.d(), cov.d())?;
    let s: Vec<f64> = (0..series.d()).map(|i| region_sum(series, cm, i)).collect();
    Ok(cov.inv_quad_form(&s))
}

fn check_dims(d: usize, cm_d: usize, cov_d: usize) -> Result<()> {
    if cm_d != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cm_d,
        });
    }
    if cov_d != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cov_d,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    #[default]
    None,
    /// `w_M(θ, i) = (G - F)^{-β} (1 - G + F)^{-β}` applied to each `S(i)`.
    MultivariateComponentwise,
    /// `w_P(θ) = (mean squared deviation of D_θ)^{-β}`.
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightSpec {
    pub beta: f64,
    pub scheme: WeightScheme,
}

impl WeightSpec {
    pub const NONE: WeightSpec = WeightSpec {
        beta: 0.0,
        scheme: WeightScheme::None,
    };

    pub fn new(beta: f64, scheme: WeightScheme) -> Result<Self> {
        if !(0.0..=0.5).contains(&beta) {
            return Err(Error::InvalidArgument(format!(
                "weight exponent {beta} outside [0, 1/2]"
            )));
        }
        Ok(Self { beta, scheme })
    }

    pub fn multivariate(beta: f64) -> Result<Self> {
        Self::new(beta, WeightScheme::MultivariateComponentwise)
    }

    pub fn projection(beta: f64) -> Result<Self> {
        Self::new(beta, WeightScheme::Projection)
    }

    pub(crate) fn multivariate_beta(&self) -> f64 {
        match self.scheme {
            WeightScheme::MultivariateComponentwise => self.beta,
            _ => 0.0,
        }
    }

    pub(crate) fn projection_beta(&self) -> f64 {
        match self.scheme {
            WeightScheme::Projection => self.beta,
            _ => 0.0,
        }
    }
}

/// Componentwise weight `(g - f)^{-β} (1 - g + f)^{-β}`; exactly 1 when `β = 0`.
pub fn componentwise_weight(f: f64, g: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    let w = g - f;
    (w.powf(-beta)) * ((1.0 - w).powf(-beta))
}

/// Result of maximizing a statistic over a parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    /// Maximum over evaluated grid points.
    pub value: f64,
    /// Grid index of the first maximizer.
    pub argmax: usize,
    pub params: PlumeParams,
    /// Per-point values in grid order; `NaN` where a point was skipped.
    pub surface: Vec<f64>,
    /// Grid indices skipped because the objective is undefined there.
    pub skipped: Vec<usize>,
}

/// First index attaining the maximum, ignoring `NaN`.
pub(crate) fn first_argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if v <= values[b] => {}
            _ => best = Some(k),
        }
    }
    best
}

fn outcome(grid: &ParamGrid, surface: Vec<f64>) -> Result<ScanOutcome> {
    let skipped: Vec<usize> = surface
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_nan())
        .map(|(k, _)| k)
        .collect();
    let argmax = first_argmax(&surface).ok_or(Error::ConstantProfile)?;
    Ok(ScanOutcome {
        value: surface[argmax],
        argmax,
        params: grid.points[argmax],
        surface,
        skipped,
    })
}

/// Per-component centered prefix sums, shared by every grid point.
pub(crate) struct PrefixTable {
    prefixes: Vec<Vec<f64>>,
    n: usize,
}

impl PrefixTable {
    pub(crate) fn new(series: &MultiSeries) -> Self {
        Self {
            prefixes: series
                .components()
                .iter()
                .map(|c| centered_prefix(c))
                .collect(),
            n: series.n(),
        }
    }

    fn region_sums(&self, cm: &ChangeMap) -> Vec<f64> {
        self.prefixes
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (lo, hi) = cm.index_bounds(i, self.n);
                if hi <= lo {
                    0.0
                } else {
                    p[hi] - p[lo]
                }
            })
            .collect()
    }
}

/// Weighted region sums for one change map; empty or full regions contribute 0.
fn weighted_sums(table: &PrefixTable, cm: &ChangeMap, beta: f64) -> Vec<f64> {
    let mut s = table.region_sums(cm);
    if beta != 0.0 {
        for (i, v) in s.iter_mut().enumerate() {
            let w = componentwise_weight(cm.f[i], cm.g[i], beta);
            *v = if w.is_finite() { *v * w } else { 0.0 };
        }
    }
    s
}

/// Values `(1/N) A^M(θ)` (optionally weighted) for every grid point.
pub(crate) fn multivariate_surface(
    series: &MultiSeries,
    maps: &[ChangeMap],
    cov: &CovModel,
    beta: f64,
) -> Vec<f64> {
    let table = PrefixTable::new(series);
    let n = series.n() as f64;
    par::map_range(maps.len(), |k| {
        cov.inv_quad_form(&weighted_sums(&table, &maps[k], beta)) / n
    })
}

/// `T^M = max over grid of (1/N) A^M(θ)`.
pub fn t_multivariate(
    series: &MultiSeries,
    grid: &ParamGrid,
    layout: &TransectLayout,
    cov: &CovModel,
    weights: &WeightSpec,
) -> Result<ScanOutcome> {
    series.check_layout(layout)?;
    check_dims(series.d(), layout.d(), cov.d())?;
    let maps = grid.change_maps(layout);
    let surface = multivariate_surface(series, &maps, cov, weights.multivariate_beta());
    outcome(grid, surface)
}

/// Assumed change direction `Δ̃`, stored with unit Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProjectionDirection(Vec<f64>);

impl ProjectionDirection {
    pub fn new(delta_tilde: Vec<f64>) -> Result<Self> {
        if delta_tilde.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite direction".into()));
        }
        let norm = delta_tilde.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::ZeroDirection);
        }
        Ok(Self(delta_tilde.into_iter().map(|v| v / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * c).collect())
    }

    /// Standardized direction `Σ^{-1/2} Δ̃ / ||Σ^{-1/2} Δ̃||`.
    pub fn standardized(&self, cov: &CovModel) -> Vec<f64> {
        let z = cov.inv_sqrt_apply(&self.0);
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        z.into_iter().map(|v| v / norm).collect()
    }
}

impl TryFrom<Vec<f64>> for ProjectionDirection {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProjectionDirection> for Vec<f64> {
    fn from(d: ProjectionDirection) -> Self {
        d.0
    }
}

/// Loadings of the projection and the jump coefficients of its profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `Σ^{-1} Δ̃ / ||Σ^{-1/2} Δ̃||`: `Y(t) = X(t) · loadings`.
    pub loadings: Vec<f64>,
    /// `Δ̃_i * loadings_i`: height contributed by component `i` to `D_θ`.
    pub coefficients: Vec<f64>,
}

impl Projection {
    pub fn new(dir: &ProjectionDirection, cov: &CovModel) -> Result<Self> {
        if dir.d() != cov.d() {
            return Err(Error::DimensionMismatch {
                expected: cov.d(),
                got: dir.d(),
            });
        }
        let dt = dir.as_slice();
        let whitened = cov.inv_sqrt_apply(dt);
        let norm = whitened.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::ZeroDirection);
        }
        let loadings: Vec<f64> = cov.solve(dt).into_iter().map(|v| v / norm).collect();
        let coefficients = dt.iter().zip(&loadings).map(|(a, b)| a * b).collect();
        Ok(Self {
            loadings,
            coefficients,
        })
    }

    pub fn apply(&self, series: &MultiSeries) -> Vec<f64> {
        (0..series.n())
            .map(|t| {
                series
                    .components()
                    .iter()
                    .zip(&self.loadings)
                    .map(|(c, w)| c[t] * w)
                    .sum()
            })
            .collect()
    }
}

/// `Y(t) = X(t)^T Σ^{-1} Δ̃ / ||Σ^{-1/2} Δ̃||`.
pub fn project_series(
    series: &MultiSeries,
    dir: &ProjectionDirection,
    cov: &CovModel,
) -> Result<Vec<f64>> {
    check_dims(series.d(), dir.d(), cov.d())?;
    Ok(Projection::new(dir, cov)?.apply(series))
}

/// `D_θ(s)` for real `s`: left-continuous step function in rescaled time.
pub fn signal_profile(
    cm: &ChangeMap,
    dir: &ProjectionDirection,
    cov: &CovModel,
    s: f64,
) -> Result<f64> {
    check_dims(cm.d(), dir.d(), cov.d())?;
    let proj = Projection::new(dir, cov)?;
    Ok((0..cm.d())
        .filter(|&i| cm.f[i] < s && s <= cm.g[i])
        .map(|i| proj.coefficients[i])
        .sum())
}

/// `D_θ(t/N)` for `t = 1..=N`, using the integer region convention.
pub fn profile_values(bounds: &[(usize, usize)], coefficients: &[f64], n: usize) -> Vec<f64> {
    (1..=n)
        .map(|t| {
            bounds
                .iter()
                .zip(coefficients)
                .filter(|((lo, hi), _)| *lo < t && t <= *hi)
                .map(|(_, c)| c)
                .sum()
        })
        .collect()
}

/// `A^P(θ) = |sum_t D_θ(t/N) (Y(t) - mean(Y))|`, evaluated as a direct sum.
pub fn projection_objective(
    series: &MultiSeries,
    cm: &ChangeMap,
    dir: &ProjectionDirection,
    cov: &CovModel,
) -> Result<f64> {
    check_dims(series.d(), cm.d(), cov.d())?;
    let proj = Projection::new(dir, cov)?;
    let y = proj.apply(series);
    let ybar = mean(&y);
    let d = profile_values(
        &cm.all_index_bounds(series.n()),
        &proj.coefficients,
        series.n(),
    );
    Ok(d.iter()
        .zip(&y)
        .map(|(a, b)| a * (b - ybar))
        .sum::<f64>()
        .abs())
}

/// A discontinuity of `D_θ` between `k/N` and `(k+1)/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    /// Lattice position `k`, so the jump sits at `s = k/N`.
    pub index: usize,
    /// `D(s+) - D(s)`.
    pub size: f64,
}

/// Jumps of `D_θ` strictly inside `(0, 1)`, merged by location, zeros dropped.
/// There are at most `2d` of them.
pub fn profile_jumps(bounds: &[(usize, usize)], coefficients: &[f64], n: usize) -> Vec<Jump> {
    let mut raw: Vec<(usize, f64)> = Vec::with_capacity(2 * bounds.len());
    for (&(lo, hi), &c) in bounds.iter().zip(coefficients) {
        if hi <= lo || c == 0.0 {
            continue;
        }
        raw.push((lo, c));
        raw.push((hi, -c));
    }
    raw.sort_by_key(|(k, _)| *k);
    let mut jumps: Vec<Jump> = Vec::with_capacity(raw.len());
    for (k, c) in raw {
        match jumps.last_mut() {
            Some(j) if j.index == k => j.size += c,
            _ => jumps.push(Jump { index: k, size: c }),
        }
    }
    jumps.retain(|j| j.index > 0 && j.index < n && j.size != 0.0);
    jumps
}

/// Summation-by-parts form of `A^P`: `|sum_{s in M} (D(s+) - D(s)) P(floor(Ns))|`
/// with `P` the centered partial sums of `Y`.
pub fn jump_form_objective(
    series: &MultiSeries,
    cm: &ChangeMap,
    dir: &ProjectionDirection,
    cov: &CovModel,
) -> Result<f64> {
    check_dims(series.d(), cm.d(), cov.d())?;
    let proj = Projection::new(dir, cov)?;
    let prefix = centered_prefix(&proj.apply(series));
    let jumps = profile_jumps(
        &cm.all_index_bounds(series.n()),
        &proj.coefficients,
        series.n(),
    );
    Ok(jump_sum(&jumps, &prefix).abs())
}

pub(crate) fn jump_sum(jumps: &[Jump], path: &[f64]) -> f64 {
    jumps.iter().map(|j| j.size * path[j.index]).sum()
}

/// `(1/N) sum_t (D(t/N) - mean D)^2` from pairwise region overlaps.
pub fn profile_variance(bounds: &[(usize, usize)], coefficients: &[f64], n: usize) -> f64 {
    let nf = n as f64;
    let mut first = 0.0;
    let mut second = 0.0;
    for a in 0..bounds.len() {
        let (lo_a, hi_a) = bounds[a];
        if hi_a <= lo_a {
            continue;
        }
        let ca = coefficients[a];
        first += ca * (hi_a - lo_a) as f64;
        second += ca * ca * (hi_a - lo_a) as f64;
        for b in (a + 1)..bounds.len() {
            let (lo_b, hi_b) = bounds[b];
            let overlap = hi_a.min(hi_b).saturating_sub(lo_a.max(lo_b)) as f64;
            second += 2.0 * ca * coefficients[b] * overlap;
        }
    }
    let m = first / nf;
    (second / nf - m * m).max(0.0)
}

/// Whether a profile variance is numerically zero for the given coefficients.
pub(crate) fn is_constant_profile(variance: f64, coefficients: &[f64]) -> bool {
    let scale: f64 = coefficients.iter().map(|c| c.abs()).sum();
    variance <= 1e-12 * scale * scale
}

/// Per-point `A^P(θ) · (profile variance)^{-exponent}`, `NaN` where the
/// profile is constant and `exponent > 0`.
pub(crate) fn projection_surface(
    y: &[f64],
    maps: &[ChangeMap],
    proj: &Projection,
    exponent: f64,
) -> Vec<f64> {
    let n = y.len();
    let prefix = centered_prefix(y);
    par::map_range(maps.len(), |k| {
        let bounds = maps[k].all_index_bounds(n);
        let jumps = profile_jumps(&bounds, &proj.coefficients, n);
        let a = jump_sum(&jumps, &prefix).abs();
        if exponent == 0.0 {
            return a;
        }
        let var = profile_variance(&bounds, &proj.coefficients, n);
        if is_constant_profile(var, &proj.coefficients) {
            f64::NAN
        } else {
            a * var.powf(-exponent)
        }
    })
}

/// `T^P = max over grid of w_P(θ) A^P(θ) / (sqrt(N) σ̂)`.
///
/// With a projection weight and `β > 0`, grid points whose profile is
/// constant are skipped and listed in [`ScanOutcome::skipped`].
pub fn t_projection(
    series: &MultiSeries,
    grid: &ParamGrid,
    layout: &TransectLayout,
    dir: &ProjectionDirection,
    cov: &CovModel,
    sigma_hat: f64,
    weights: &WeightSpec,
) -> Result<ScanOutcome> {
    if !(sigma_hat.is_finite() && sigma_hat > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma_hat {sigma_hat} must be positive"
        )));
    }
    series.check_layout(layout)?;
    check_dims(series.d(), dir.d(), cov.d())?;
    let proj = Projection::new(dir, cov)?;
    let y = proj.apply(series);
    let maps = grid.change_maps(layout);
    let scale = (series.n() as f64).sqrt() * sigma_hat;
    let surface: Vec<f64> = projection_surface(&y, &maps, &proj, weights.projection_beta())
        .into_iter()
        .map(|v| v / scale)
        .collect();
    outcome(grid, surface)
}
