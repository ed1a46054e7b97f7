//! Monte Carlo tables for the null limits of both statistics.
//!
//! Bridges are simulated on the lattice `k/N` of the data, and every change
//! boundary is read at its snapped position `floor(N s)/N`. On that lattice a
//! random-walk bridge has exactly the law of the centered partial sums of
//! i.i.d. Gaussian data, so tables are exact for the finite grid in use.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cov::{CovModel, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{ParamGrid, PlumeParams, TransectLayout};
use crate::par;
use crate::rng::{self, purpose};
use crate::stats::{
    componentwise_weight, is_constant_profile, jump_sum, profile_jumps, profile_variance, Jump,
    Projection, ProjectionDirection, WeightSpec,
};

pub const MIN_REPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    Multivariate,
    Projection,
}

impl StatKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StatKind::Multivariate => "multivariate",
            StatKind::Projection => "projection",
        }
    }
}

/// Sorted replicate values of a simulated null limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullTable {
    pub stat_kind: StatKind,
    pub seed: u64,
    pub reps: usize,
    pub bridge_grid: usize,
    pub fingerprint: String,
    pub values: Vec<f64>,
    /// Set when the covariance provenance does not justify the limit law.
    pub caveat: bool,
}

impl NullTable {
    /// Empirical quantile `values[ceil(level * reps) - 1]`.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "level {level} outside (0, 1)"
            )));
        }
        let k = ((level * self.values.len() as f64).ceil() as usize).clamp(1, self.values.len());
        Ok(self.values[k - 1])
    }

    pub fn quantiles(&self, levels: &[f64]) -> Result<Vec<(f64, f64)>> {
        levels
            .iter()
            .map(|&l| self.quantile(l).map(|q| (l, q)))
            .collect()
    }
}

/// `(1 + #{values >= observed}) / (reps + 1)`.
pub fn p_value(table: &NullTable, observed: f64) -> f64 {
    let below = table.values.partition_point(|v| *v < observed);
    let at_least = table.values.len() - below;
    (1 + at_least) as f64 / (table.values.len() + 1) as f64
}

/// True unless the covariance is known or is an estimated diagonal.
pub fn misspecification_caveat(cov: &CovModel) -> bool {
    match cov.provenance() {
        Provenance::Known => false,
        Provenance::Estimated => !cov.is_diagonal(),
        Provenance::User => true,
    }
}

/// Brownian bridge on `{0, 1/m, ..., 1}` from a Gaussian random walk.
pub fn simulate_bridge(m: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("bridge resolution {m} < 2")));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let mut w = Vec::with_capacity(m + 1);
    w.push(0.0);
    let mut acc = 0.0;
    for _ in 0..m {
        acc += scale * rng.sample::<f64, _>(StandardNormal);
        w.push(acc);
    }
    let end = w[m];
    let mf = m as f64;
    let mut b: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(k, v)| v - (k as f64 / mf) * end)
        .collect();
    b[0] = 0.0;
    b[m] = 0.0;
    Ok(b)
}

#[derive(Serialize)]
struct FingerprintInput<'a> {
    stat_kind: StatKind,
    layout: &'a TransectLayout,
    grid: &'a [PlumeParams],
    weights: &'a WeightSpec,
    coefficients: Option<&'a [f64]>,
}

/// SHA-256 over a canonical JSON encoding of everything the table depends on
/// apart from seed and replicate count.
pub fn fingerprint(
    stat_kind: StatKind,
    layout: &TransectLayout,
    grid: &ParamGrid,
    weights: &WeightSpec,
    coefficients: Option<&[f64]>,
) -> String {
    let input = FingerprintInput {
        stat_kind,
        layout,
        grid: &grid.points,
        weights,
        coefficients,
    };
    let bytes = serde_json::to_vec(&input).expect("fingerprint input serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_REPS} replicates required, got {reps}"
        )));
    }
    Ok(())
}

fn sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values
}

/// Per-component terms `(lo, hi, w^2)` of one grid point.
type Increments = Vec<(usize, usize, f64)>;

/// Null limit of `T^M`: `sup over grid of sum_j w_j^2 (B_j(G_j) - B_j(F_j))^2`
/// with independent bridges.
pub fn mc_null_multivariate(
    layout: &TransectLayout,
    grid: &ParamGrid,
    weights: &WeightSpec,
    reps: usize,
    seed: u64,
) -> Result<NullTable> {
    layout.validate()?;
    check_reps(reps)?;
    let n = layout.n;
    let beta = weights.multivariate_beta();
    let terms: Vec<Increments> = grid
        .change_maps(layout)
        .iter()
        .map(|cm| {
            (0..cm.d())
                .filter_map(|i| {
                    let (lo, hi) = cm.index_bounds(i, n);
                    let w = componentwise_weight(cm.f[i], cm.g[i], beta);
                    (hi > lo && w.is_finite()).then_some((lo, hi, w * w))
                })
                .collect()
        })
        .collect();
    let d = layout.d();
    let values = par::map_range(reps, |r| {
        let mut rng = rng::stream(seed, purpose::NULL_MULTIVARIATE, r as u64);
        let bridges: Vec<Vec<f64>> = (0..d)
            .map(|_| simulate_bridge(n, &mut rng).expect("layout n checked"))
            .collect();
        terms
            .iter()
            .map(|t| {
                t.iter()
                    .zip(&bridges)
                    .map(|(&(lo, hi, w2), b)| {
                        let inc = b[hi] - b[lo];
                        w2 * inc * inc
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(NullTable {
        stat_kind: StatKind::Multivariate,
        seed,
        reps,
        bridge_grid: n,
        fingerprint: fingerprint(StatKind::Multivariate, layout, grid, weights, None),
        values: sorted(values),
        caveat: false,
    })
}

/// `∫_0^1 (D(z) - ∫D)^2 dz` for `D = sum_i c_i 1{f_i < z <= g_i}`.
pub fn continuum_profile_variance(f: &[f64], g: &[f64], coefficients: &[f64]) -> f64 {
    let len = |a: usize| (g[a] - f[a]).max(0.0);
    let mut first = 0.0;
    let mut second = 0.0;
    for a in 0..coefficients.len() {
        let ca = coefficients[a];
        first += ca * len(a);
        second += ca * ca * len(a);
        for b in (a + 1)..coefficients.len() {
            let overlap = (g[a].min(g[b]) - f[a].max(f[b])).max(0.0);
            second += 2.0 * ca * coefficients[b] * overlap;
        }
    }
    (second - first * first).max(0.0)
}

/// Null limit of `T^P`: `sup over grid of |sum of jumps of D times B| / var(D)^β`,
/// with one bridge per replicate. Grid points with constant `D` are skipped
/// when `β > 0`.
pub fn mc_null_projection(
    layout: &TransectLayout,
    grid: &ParamGrid,
    dir: &ProjectionDirection,
    cov: &CovModel,
    weights: &WeightSpec,
    reps: usize,
    seed: u64,
) -> Result<NullTable> {
    layout.validate()?;
    check_reps(reps)?;
    if dir.d() != layout.d() {
        return Err(Error::DimensionMismatch {
            expected: layout.d(),
            got: dir.d(),
        });
    }
    let proj = Projection::new(dir, cov)?;
    let n = layout.n;
    let beta = weights.projection_beta();
    let terms: Vec<(Vec<Jump>, f64)> = grid
        .change_maps(layout)
        .iter()
        .filter_map(|cm| {
            let bounds = cm.all_index_bounds(n);
            let jumps = profile_jumps(&bounds, &proj.coefficients, n);
            if beta == 0.0 {
                return Some((jumps, 1.0));
            }
            let var = profile_variance(&bounds, &proj.coefficients, n);
            (!is_constant_profile(var, &proj.coefficients)).then(|| (jumps, var.powf(-beta)))
        })
        .collect();
    if terms.is_empty() {
        return Err(Error::ConstantProfile);
    }
    let values = par::map_range(reps, |r| {
        let mut rng = rng::stream(seed, purpose::NULL_PROJECTION, r as u64);
        let b = simulate_bridge(n, &mut rng).expect("layout n checked");
        terms
            .iter()
            .map(|(jumps, w)| w * jump_sum(jumps, &b).abs())
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(NullTable {
        stat_kind: StatKind::Projection,
        seed,
        reps,
        bridge_grid: n,
        fingerprint: fingerprint(
            StatKind::Projection,
            layout,
            grid,
            weights,
            Some(&proj.coefficients),
        ),
        values: sorted(values),
        caveat: misspecification_caveat(cov),
    })
}
