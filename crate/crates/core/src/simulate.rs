//! Synthetic data from the linear plume model with configurable change
//! profile and error process, plus the exact asymptotic signal oracles.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{linear_change_map, ChangeMap, ParamGrid, PlumeParams, TransectLayout};
use crate::rng::{self, purpose};
use crate::stats::{centered_prefix, MultiSeries, ProjectionDirection, Truth};

/// Rise and decay rates of the change profile `(i/d)^a exp(-b i/d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileShape {
    pub a: f64,
    pub b: f64,
}

impl ProfileShape {
    /// Calibrated so the unit-norm profile over six transects spans
    /// roughly `[0.22, 0.56]` and rises quickly before a slower decay.
    pub const CALIBRATED: ProfileShape = ProfileShape { a: 2.44, b: 5.25 };
}

impl Default for ProfileShape {
    fn default() -> Self {
        Self::CALIBRATED
    }
}

/// `Δ_i ∝ (i/d)^a exp(-b i/d)` rescaled to Euclidean norm `norm`.
pub fn delta_profile(d: usize, norm: f64, a: f64, b: f64) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidArgument("profile needs d >= 1".into()));
    }
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "delta norm {norm} must be positive"
        )));
    }
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "profile rates ({a}, {b}) must be positive"
        )));
    }
    let raw: Vec<f64> = (1..=d)
        .map(|i| {
            let u = i as f64 / d as f64;
            u.powf(a) * (-b * u).exp()
        })
        .collect();
    let len = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(raw.into_iter().map(|v| v * norm / len).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    IidGaussian,
    /// Moving average of order nine driven by standard Gaussian noise.
    Ma9,
    /// Moving average with coefficients for lags `0, 1, ...`.
    CustomMa(Vec<f64>),
}

pub const MA9_COEFFICIENTS: [f64; 10] = [1.0, 0.3, 0.2, 0.1, 0.0, -0.1, -0.2, -0.3, -0.4, -0.5];

impl ErrorModel {
    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            ErrorModel::IidGaussian => vec![1.0],
            ErrorModel::Ma9 => MA9_COEFFICIENTS.to_vec(),
            ErrorModel::CustomMa(c) => c.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.coefficients();
        if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "moving-average coefficients must be finite and non-empty".into(),
            ));
        }
        Ok(())
    }

    /// Long-run variance `(sum of coefficients)^2` for unit innovations.
    pub fn long_run_variance(&self) -> f64 {
        let s: f64 = self.coefficients().iter().sum();
        s * s
    }

    /// Autocovariance at `lag` for unit innovations.
    pub fn autocovariance(&self, lag: usize) -> f64 {
        let c = self.coefficients();
        if lag >= c.len() {
            return 0.0;
        }
        c.iter().zip(&c[lag..]).map(|(a, b)| a * b).sum()
    }
}

/// `d x n` error matrix; component `i` uses its own stream so rows do not
/// depend on `d`.
pub fn gen_errors(model: &ErrorModel, d: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    model.validate()?;
    let coeffs = model.coefficients();
    let q = coeffs.len() - 1;
    Ok((0..d)
        .map(|i| {
            let mut rng = rng::stream(seed, purpose::ERRORS, i as u64);
            let z: Vec<f64> = (0..n + q).map(|_| rng.sample(StandardNormal)).collect();
            (0..n)
                .map(|t| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c * z[t + q - j])
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// Adds i.i.d. `N(0, tau^2)` disturbances to each entry of `delta`.
pub fn contaminate_direction(delta: &[f64], tau: f64, seed: u64) -> Result<Vec<f64>> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau {tau} must be non-negative"
        )));
    }
    if tau == 0.0 {
        return Ok(delta.to_vec());
    }
    let mut rng = rng::stream(seed, purpose::CONTAMINATION, 0);
    Ok(delta
        .iter()
        .map(|v| v + tau * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

fn default_norm() -> f64 {
    1.0
}

/// Full description of one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub layout: TransectLayout,
    pub true_params: PlumeParams,
    #[serde(default = "default_norm")]
    pub delta_norm: f64,
    #[serde(default)]
    pub profile: ProfileShape,
    pub error_model: ErrorModel,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub seed: u64,
    /// Baselines; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    /// Explicit change vector replacing the profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
}

impl SimDesign {
    /// Six transects, `N` observations each, a 20 degree plume from the
    /// origin, unit change norm for i.i.d. errors and norm 3 for MA(9).
    pub fn paper(n: usize, error_model: ErrorModel, seed: u64) -> Self {
        let delta_norm = if error_model == ErrorModel::Ma9 {
            3.0
        } else {
            1.0
        };
        Self {
            layout: TransectLayout::reference(n),
            true_params: PlumeParams {
                x_s: 0.0,
                y_s: 0.0,
                alpha: 20.0,
            },
            delta_norm,
            profile: ProfileShape::CALIBRATED,
            error_model,
            tau: 0.0,
            seed,
            mu: None,
            delta: None,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.true_params.validate()?;
        self.error_model.validate()?;
        let d = self.layout.d();
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tau {} must be non-negative",
                self.tau
            )));
        }
        for v in [&self.mu, &self.delta].into_iter().flatten() {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(
                    "non-finite baseline or change".into(),
                ));
            }
        }
        if self.delta.is_none() && !(self.delta_norm > 0.0) {
            return Err(Error::InvalidArgument("delta_norm must be positive".into()));
        }
        Ok(())
    }

    /// Change vector before contamination; also the assumed direction.
    pub fn base_delta(&self) -> Result<Vec<f64>> {
        match &self.delta {
            Some(d) => Ok(d.clone()),
            None => delta_profile(
                self.layout.d(),
                self.delta_norm,
                self.profile.a,
                self.profile.b,
            ),
        }
    }

    /// Uncontaminated change vector as a projection direction.
    pub fn direction(&self) -> Result<ProjectionDirection> {
        ProjectionDirection::new(self.base_delta()?)
    }

    pub fn true_change_map(&self) -> ChangeMap {
        linear_change_map(&self.layout, &self.true_params)
    }

    fn baseline(&self) -> Vec<f64> {
        self.mu
            .clone()
            .unwrap_or_else(|| vec![0.0; self.layout.d()])
    }
}

fn assemble(design: &SimDesign, errors: Option<Vec<Vec<f64>>>) -> Result<MultiSeries> {
    design.validate()?;
    let cm = design.true_change_map();
    if !cm.is_strict() {
        return Err(Error::InvalidParams(
            "true parameters leave a transect without change region".into(),
        ));
    }
    let n = design.layout.n;
    let mu = design.baseline();
    let delta = contaminate_direction(&design.base_delta()?, design.tau, design.seed)?;
    let rows = (0..design.layout.d())
        .map(|i| {
            let (lo, hi) = cm.index_bounds(i, n);
            (0..n)
                .map(|k| {
                    let t = k + 1;
                    let shift = if lo < t && t <= hi { delta[i] } else { 0.0 };
                    let e = errors.as_ref().map_or(0.0, |e| e[i][k]);
                    mu[i] + shift + e
                })
                .collect()
        })
        .collect();
    Ok(MultiSeries::new(rows)?.with_truth(Truth {
        mu,
        delta,
        params: design.true_params,
    }))
}

/// `X_i(t) = μ_i + Δ_i 1{F(i) < t/N <= G(i)} + e_i(t)`.
pub fn gen_dataset(design: &SimDesign) -> Result<MultiSeries> {
    let errors = gen_errors(
        &design.error_model,
        design.layout.d(),
        design.layout.n,
        design.seed,
    )?;
    assemble(design, Some(errors))
}

/// The dataset with the error term removed.
pub fn gen_signal(design: &SimDesign) -> Result<MultiSeries> {
    assemble(design, None)
}

/// Limit of the scaled region sum for an epidemic change on `(t0, t1]`,
/// evaluated at boundary `s`.
pub fn signal_oracle_g(t0: f64, t1: f64, s: f64) -> f64 {
    let w = t1 - t0;
    if s <= t0 {
        -s * w
    } else if s <= t1 {
        s * (1.0 - w) - t0
    } else {
        (1.0 - s) * w
    }
}

/// `g(G_cand(i)) - g(F_cand(i))` with `g` built from the true boundaries.
pub fn signal_oracle_h(truth: &ChangeMap, candidate: &ChangeMap, i: usize) -> f64 {
    let (t0, t1) = (truth.f[i], truth.g[i]);
    signal_oracle_g(t0, t1, candidate.g[i]) - signal_oracle_g(t0, t1, candidate.f[i])
}

/// Largest `|(1/N) S_θ(i) - Δ_i h_θ(i)|` over the grid and components for
/// the noiseless dataset of `design`.
pub fn noiseless_signal_check(design: &SimDesign, grid: &ParamGrid) -> Result<f64> {
    let data = gen_signal(design)?;
    let truth = design.true_change_map();
    let delta = &data
        .truth
        .as_ref()
        .expect("simulated data carries truth")
        .delta;
    let n = data.n();
    let prefixes: Vec<Vec<f64>> = data
        .components()
        .iter()
        .map(|c| centered_prefix(c))
        .collect();
    let mut worst = 0.0f64;
    for cm in grid.change_maps(&design.layout) {
        for (i, p) in prefixes.iter().enumerate() {
            let (lo, hi) = cm.index_bounds(i, n);
            let s = if hi > lo { p[hi] - p[lo] } else { 0.0 };
            let dev = (s / n as f64 - delta[i] * signal_oracle_h(&truth, &cm, i)).abs();
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}
