//! Plume geometry: transect layouts, plume parameters and the map from a
//! candidate source to per-transect change boundaries in rescaled time.
//!
//! Wind blows along +y and every transect runs parallel to the x axis at a
//! fixed downwind distance. A linear plume with apex `(x_s, y_s)` and full
//! opening angle `alpha` covers `[x_s - w, x_s + w]` on a transect at distance
//! `y`, where `w = (y - y_s) * tan(alpha / 2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One flight leg, perpendicular to the wind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transect {
    /// Downwind distance of the transect.
    pub y: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Offset compensating a wind change between legs.
    #[serde(default)]
    pub x_shift: f64,
}

impl Transect {
    pub fn new(y: f64, x_min: f64, x_max: f64) -> Self {
        Self {
            y,
            x_min,
            x_max,
            x_shift: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransectLayout {
    /// Observations per transect.
    pub n: usize,
    pub transects: Vec<Transect>,
}

impl TransectLayout {
    pub fn new(n: usize, transects: Vec<Transect>) -> Result<Self> {
        let layout = Self { n, transects };
        layout.validate()?;
        Ok(layout)
    }

    /// Six equally spaced transects at unit spacing (`y = 3..=8`) over the
    /// window `[-2, 2]`. A 20 degree plume from the origin cuts every
    /// transect strictly inside the window.
    pub fn reference(n: usize) -> Self {
        let transects = (3..=8)
            .map(|y| Transect::new(y as f64, -2.0, 2.0))
            .collect();
        Self { n, transects }
    }

    pub fn d(&self) -> usize {
        self.transects.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.transects.is_empty() {
            return Err(Error::InvalidLayout("no transects".into()));
        }
        if self.n < 4 {
            return Err(Error::InvalidLayout(format!(
                "n = {} is below the minimum of 4",
                self.n
            )));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, t) in self.transects.iter().enumerate() {
            if ![t.y, t.x_min, t.x_max, t.x_shift]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(Error::InvalidLayout(format!(
                    "transect {i} has non-finite fields"
                )));
            }
            if t.x_min >= t.x_max {
                return Err(Error::InvalidLayout(format!(
                    "transect {i}: x_min {} must be below x_max {}",
                    t.x_min, t.x_max
                )));
            }
            if t.y <= 0.0 {
                return Err(Error::InvalidLayout(format!(
                    "transect {i}: distance {} must be positive",
                    t.y
                )));
            }
            if t.y < prev {
                return Err(Error::InvalidLayout(format!(
                    "transect {i}: distances must be nondecreasing"
                )));
            }
            prev = t.y;
        }
        Ok(())
    }

    pub fn min_distance(&self) -> f64 {
        self.transects
            .iter()
            .map(|t| t.y)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Candidate source location and full opening angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlumeParams {
    pub x_s: f64,
    pub y_s: f64,
    pub alpha: f64,
}

impl PlumeParams {
    pub fn new(x_s: f64, y_s: f64, alpha: f64) -> Result<Self> {
        let p = Self { x_s, y_s, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_s.is_finite() && self.y_s.is_finite()) {
            return Err(Error::InvalidParams("non-finite source".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 180.0) {
            return Err(Error::InvalidParams(format!(
                "opening angle {} outside (0, 180)",
                self.alpha
            )));
        }
        Ok(())
    }

    fn bits(&self) -> [u64; 3] {
        [self.x_s.to_bits(), self.y_s.to_bits(), self.alpha.to_bits()]
    }
}

/// Per-component change boundaries `(f(i), g(i))` in rescaled time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeMap {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl ChangeMap {
    pub fn new(f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if f.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: f.len(),
                got: g.len(),
            });
        }
        for (i, (&a, &b)) in f.iter().zip(&g).enumerate() {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
                return Err(Error::InvalidArgument(format!(
                    "component {i}: boundaries ({a}, {b}) violate 0 <= f <= g <= 1"
                )));
            }
        }
        Ok(Self { f, g })
    }

    pub fn d(&self) -> usize {
        self.f.len()
    }

    pub fn is_strict(&self) -> bool {
        self.f.iter().zip(&self.g).all(|(a, b)| a < b)
    }

    /// Sample index range `(lo, hi]` of component `i` for a series of length `n`.
    pub fn index_bounds(&self, i: usize, n: usize) -> (usize, usize) {
        (boundary_index(n, self.f[i]), boundary_index(n, self.g[i]))
    }

    pub fn all_index_bounds(&self, n: usize) -> Vec<(usize, usize)> {
        (0..self.d()).map(|i| self.index_bounds(i, n)).collect()
    }
}

/// `floor(n * s)` clamped to `[0, n]`. Region `i` covers the 1-based sample
/// indices `boundary_index(n, f) + 1 ..= boundary_index(n, g)`.
pub fn boundary_index(n: usize, s: f64) -> usize {
    let k = (n as f64 * s).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(n)
    }
}

/// Linear plume map from parameters to per-transect change boundaries.
pub fn linear_change_map(layout: &TransectLayout, params: &PlumeParams) -> ChangeMap {
    let half_tan = (params.alpha.to_radians() / 2.0).tan();
    let mut f = Vec::with_capacity(layout.d());
    let mut g = Vec::with_capacity(layout.d());
    for t in &layout.transects {
        if t.y <= params.y_s {
            f.push(0.0);
            g.push(0.0);
            continue;
        }
        let w = (t.y - params.y_s) * half_tan;
        let width = t.x_max - t.x_min;
        let lo = (params.x_s - w - t.x_min - t.x_shift) / width;
        let hi = (params.x_s + w - t.x_min - t.x_shift) / width;
        f.push(clamp_unit(lo));
        g.push(clamp_unit(hi));
    }
    ChangeMap { f, g }
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// Every transect must see a non-empty change region.
    #[default]
    Strict,
    /// Empty regions are allowed and contribute nothing.
    Relaxed,
}

/// Axis-aligned search specification: `[min, max, step]` for each source
/// coordinate plus a list of opening angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub angles: Vec<f64>,
    #[serde(default)]
    pub mode: GridMode,
}

impl GridSpec {
    pub fn build(&self, layout: &TransectLayout) -> Result<ParamGrid> {
        build_grid(self, layout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub points: Vec<PlumeParams>,
    pub mode: GridMode,
}

impl ParamGrid {
    /// Builds a grid from explicit points, applying the same filtering and
    /// de-duplication as [`build_grid`].
    pub fn from_points(
        points: Vec<PlumeParams>,
        layout: &TransectLayout,
        mode: GridMode,
    ) -> Result<Self> {
        layout.validate()?;
        let mut seen = std::collections::HashSet::new();
        let mut kept = Vec::with_capacity(points.len());
        for p in points {
            p.validate()?;
            if !seen.insert(p.bits()) {
                continue;
            }
            if mode == GridMode::Strict && !admissible_strict(layout, &p) {
                continue;
            }
            kept.push(p);
        }
        if kept.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { points: kept, mode })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn change_maps(&self, layout: &TransectLayout) -> Vec<ChangeMap> {
        self.points
            .iter()
            .map(|p| linear_change_map(layout, p))
            .collect()
    }
}

fn admissible_strict(layout: &TransectLayout, p: &PlumeParams) -> bool {
    p.y_s < layout.min_distance() && linear_change_map(layout, p).is_strict()
}

/// Inclusive lattice `min, min + step, ...` up to `max`.
pub fn axis_values(spec: [f64; 3]) -> Result<Vec<f64>> {
    let [min, max, step] = spec;
    if !(min.is_finite() && max.is_finite() && step.is_finite()) {
        return Err(Error::InvalidArgument("non-finite grid range".into()));
    }
    if min > max {
        return Err(Error::InvalidArgument(format!(
            "empty range [{min}, {max}]"
        )));
    }
    if step <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "step {step} must be positive"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| min + k as f64 * step).collect())
}

/// Cartesian product of source lattice and angles, ordered x-major, then y,
/// then angle. This order defines the smallest-index tie-break used by every
/// argmax in the crate.
pub fn build_grid(spec: &GridSpec, layout: &TransectLayout) -> Result<ParamGrid> {
    let xs = axis_values(spec.x)?;
    let ys = axis_values(spec.y)?;
    if spec.angles.is_empty() {
        return Err(Error::InvalidArgument("no opening angles".into()));
    }
    let mut points = Vec::with_capacity(xs.len() * ys.len() * spec.angles.len());
    for &x in &xs {
        for &y in &ys {
            for &a in &spec.angles {
                points.push(PlumeParams {
                    x_s: x,
                    y_s: y,
                    alpha: a,
                });
            }
        }
    }
    ParamGrid::from_points(points, layout, spec.mode)
}
