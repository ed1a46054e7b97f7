//! Componentwise epidemic pre-fit, residuals, and flat-top long-run variance
//! estimation with automatic bandwidth choice.

use serde::{Deserialize, Serialize};

use crate::cov::{CovModel, Provenance};
use crate::error::{Error, Result};
use crate::par;
use crate::stats::{mean, project_series, MultiSeries, ProjectionDirection};

/// Single epidemic change fitted to one component. Indices are 1-based with
/// the change active on `f_hat < t <= g_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicFit {
    pub f_hat: usize,
    pub g_hat: usize,
    pub mu_hat: f64,
    pub delta_hat: f64,
}

/// Maximizes `|sum_{t=f+1}^{g} (x_t - mean)|` over `1 <= f < g <= N`.
///
/// The maximizing pair is the ordered pair of the first minimizer and first
/// maximizer of the centered partial sums `P(k)`, `k = 1..=N`, which is also
/// the lexicographically smallest maximizing `(f, g)`. Partial sums are
/// carried as `N S(k) - k S(N)` (a positive multiple of `P(k)`) so that
/// integer-valued input is handled exactly.
pub fn epidemic_fit(x: &[f64]) -> Result<EpidemicFit> {
    let n = x.len();
    if n < 3 {
        return Err(Error::SeriesTooShort { needed: 3, got: n });
    }
    let nf = n as f64;
    let total: f64 = x.iter().sum();
    let mut running = 0.0;
    let (mut imin, mut imax) = (1usize, 1usize);
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, v) in x.iter().enumerate() {
        running += v;
        let idx = k + 1;
        let q = nf * running - idx as f64 * total;
        if q < vmin {
            vmin = q;
            imin = idx;
        }
        if q > vmax {
            vmax = q;
            imax = idx;
        }
    }
    let (f_hat, g_hat) = if vmax == vmin {
        (1, 2)
    } else {
        (imin.min(imax), imin.max(imax))
    };

    let outside: f64 = x[..f_hat].iter().chain(&x[g_hat..]).sum();
    let mu_hat = outside / (f_hat + n - g_hat) as f64;
    let delta_hat = mean(&x[f_hat..g_hat]) - mu_hat;
    Ok(EpidemicFit {
        f_hat,
        g_hat,
        mu_hat,
        delta_hat,
    })
}

/// `x_t - mu_hat - delta_hat 1{f_hat < t <= g_hat}`.
pub fn residuals(x: &[f64], fit: &EpidemicFit) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(k, v)| {
            let t = k + 1;
            let inside = fit.f_hat < t && t <= fit.g_hat;
            v - fit.mu_hat - if inside { fit.delta_hat } else { 0.0 }
        })
        .collect()
}

/// Trapezoidal flat-top taper: 1 on `|u| <= 1/2`, linear down to 0 at `|u| = 1`.
pub fn flat_top_taper(u: f64) -> f64 {
    let a = u.abs();
    if a <= 0.5 {
        1.0
    } else if a <= 1.0 {
        2.0 * (1.0 - a)
    } else {
        0.0
    }
}

/// Constants of the automatic bandwidth rule: choose the smallest `m` with
/// `|rho(m + j)| < c sqrt(log10(N) / N)` for `j = 1..=K_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandwidthRule {
    pub c: f64,
    /// Run length `K_N`; `None` means `max(5, ceil(sqrt(log10 N)))`.
    pub run_length: Option<usize>,
}

impl Default for BandwidthRule {
    fn default() -> Self {
        Self {
            c: 2.0,
            run_length: None,
        }
    }
}

impl BandwidthRule {
    pub fn threshold(&self, n: usize) -> f64 {
        let nf = n as f64;
        self.c * (nf.log10() / nf).sqrt()
    }

    pub fn run(&self, n: usize) -> usize {
        self.run_length
            .unwrap_or_else(|| 5usize.max((n as f64).log10().sqrt().ceil() as usize))
    }
}

pub const MIN_LRV_LENGTH: usize = 20;
/// Estimates are floored at this multiple of the lag-0 autocovariance.
pub const LRV_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrvEstimate {
    pub sigma2: f64,
    /// Selected `m`; the taper reaches zero at lag `2m`.
    pub bandwidth: usize,
    pub floored: bool,
}

/// Biased sample autocovariances with lags computed on demand.
struct Autocov {
    centered: Vec<f64>,
    cache: Vec<f64>,
}

impl Autocov {
    fn new(e: &[f64]) -> Self {
        let m = mean(e);
        Self {
            centered: e.iter().map(|v| v - m).collect(),
            cache: Vec::new(),
        }
    }

    fn get(&mut self, k: usize) -> f64 {
        while self.cache.len() <= k {
            let lag = self.cache.len();
            let n = self.centered.len();
            let s: f64 = self.centered[..n - lag]
                .iter()
                .zip(&self.centered[lag..])
                .map(|(a, b)| a * b)
                .sum();
            self.cache.push(s / n as f64);
        }
        self.cache[k]
    }
}

fn check_lrv_input(e: &[f64]) -> Result<()> {
    if e.len() < MIN_LRV_LENGTH {
        return Err(Error::SeriesTooShort {
            needed: MIN_LRV_LENGTH,
            got: e.len(),
        });
    }
    Ok(())
}

/// Flat-top estimate `sum_{|k| <= 2m} taper(k / 2m) gamma(k)` at a fixed `m`.
pub fn flat_top_lrv_fixed(e: &[f64], m: usize) -> Result<LrvEstimate> {
    check_lrv_input(e)?;
    let mut ac = Autocov::new(e);
    finish(&mut ac, m.min(e.len().saturating_sub(1) / 2))
}

fn finish(ac: &mut Autocov, m: usize) -> Result<LrvEstimate> {
    let g0 = ac.get(0);
    if !(g0 > 0.0) {
        return Err(Error::ConstantSeries);
    }
    let mut s = g0;
    if m > 0 {
        let span = 2 * m;
        for k in 1..=span {
            let w = flat_top_taper(k as f64 / span as f64);
            if w != 0.0 {
                s += 2.0 * w * ac.get(k);
            }
        }
    }
    let floor = LRV_FLOOR * g0;
    Ok(if s < floor {
        LrvEstimate {
            sigma2: floor,
            bandwidth: m,
            floored: true,
        }
    } else {
        LrvEstimate {
            sigma2: s,
            bandwidth: m,
            floored: false,
        }
    })
}

/// Flat-top long-run variance with the default bandwidth rule.
pub fn flat_top_lrv(e: &[f64]) -> Result<LrvEstimate> {
    flat_top_lrv_with(e, &BandwidthRule::default())
}

pub fn flat_top_lrv_with(e: &[f64], rule: &BandwidthRule) -> Result<LrvEstimate> {
    check_lrv_input(e)?;
    let n = e.len();
    let mut ac = Autocov::new(e);
    let g0 = ac.get(0);
    if !(g0 > 0.0) {
        return Err(Error::ConstantSeries);
    }
    let threshold = rule.threshold(n);
    let run = rule.run(n);
    // the taper needs lags up to 2m, so m stays below n / 2
    let m_max = ((n - 1) / 2).min(n.saturating_sub(1 + run));
    let mut chosen = m_max;
    let mut m = 0;
    while m <= m_max {
        // first lag in the window that breaks the run, if any
        let breaker = (1..=run)
            .rev()
            .find(|&j| (ac.get(m + j) / g0).abs() >= threshold);
        match breaker {
            None => {
                chosen = m;
                break;
            }
            Some(j) => m += j,
        }
    }
    finish(&mut ac, chosen)
}

/// Diagonal long-run covariance from componentwise epidemic residuals.
pub fn diag_cov(series: &MultiSeries) -> Result<CovModel> {
    diag_cov_with(series, &BandwidthRule::default())
}

pub fn diag_cov_with(series: &MultiSeries, rule: &BandwidthRule) -> Result<CovModel> {
    let estimates: Vec<Result<LrvEstimate>> = par::map_range(series.d(), |i| {
        let x = series.component(i);
        let fit = epidemic_fit(x)?;
        flat_top_lrv_with(&residuals(x, &fit), rule)
    });
    let values = estimates
        .into_iter()
        .map(|r| r.map(|e| e.sigma2))
        .collect::<Result<Vec<_>>>()?;
    CovModel::diagonal(values, Provenance::Estimated)
}

/// Residual matrix of the componentwise epidemic fits.
pub fn residual_series(series: &MultiSeries) -> Result<MultiSeries> {
    let rows = series
        .components()
        .iter()
        .map(|x| epidemic_fit(x).map(|fit| residuals(x, &fit)))
        .collect::<Result<Vec<_>>>()?;
    MultiSeries::new(rows)
}

/// Long-run variance of the projected residuals.
pub fn projected_sigma(
    series: &MultiSeries,
    dir: &ProjectionDirection,
    cov: &CovModel,
) -> Result<LrvEstimate> {
    projected_sigma_with(series, dir, cov, &BandwidthRule::default())
}

pub fn projected_sigma_with(
    series: &MultiSeries,
    dir: &ProjectionDirection,
    cov: &CovModel,
    rule: &BandwidthRule,
) -> Result<LrvEstimate> {
    let resid = residual_series(series)?;
    flat_top_lrv_with(&project_series(&resid, dir, cov)?, rule)
}
