//! Grid-search source estimators and their statistic surfaces.

use serde::{Deserialize, Serialize};

use crate::cov::CovModel;
use crate::error::Result;
use crate::geometry::{ChangeMap, ParamGrid, PlumeParams, TransectLayout};
use crate::stats::{
    t_multivariate, t_projection, MultiSeries, ProjectionDirection, ScanOutcome, WeightSpec,
};

/// Relative distance from the maximum within which points count as near-ties.
pub const NEAR_TIE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceEntry {
    pub params: PlumeParams,
    /// `None` where the objective is undefined.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSurface {
    pub entries: Vec<SurfaceEntry>,
    /// Grid index of the first maximizer.
    pub argmax: usize,
    pub max_value: f64,
    /// Grid indices within [`NEAR_TIE_TOLERANCE`] of the maximum, argmax included.
    pub near_ties: Vec<usize>,
    pub skipped: Vec<usize>,
}

impl StatSurface {
    pub fn from_scan(grid: &ParamGrid, scan: &ScanOutcome) -> Self {
        let entries = grid
            .points
            .iter()
            .zip(&scan.surface)
            .map(|(p, v)| SurfaceEntry {
                params: *p,
                value: (!v.is_nan()).then_some(*v),
            })
            .collect();
        let max = scan.value;
        let near_ties = scan
            .surface
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan() && (max - **v).abs() <= NEAR_TIE_TOLERANCE * max.abs())
            .map(|(k, _)| k)
            .collect();
        Self {
            entries,
            argmax: scan.argmax,
            max_value: max,
            near_ties,
            skipped: scan.skipped.clone(),
        }
    }

    pub fn theta_hat(&self) -> PlumeParams {
        self.entries[self.argmax].params
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub theta_hat: PlumeParams,
    pub surface: StatSurface,
}

/// Maximizer of `S_θ^T Σ^{-1} S_θ` (optionally weighted), with the same
/// tie-break as [`t_multivariate`].
pub fn estimate_multivariate(
    series: &MultiSeries,
    layout: &TransectLayout,
    grid: &ParamGrid,
    cov: &CovModel,
    weights: &WeightSpec,
) -> Result<Estimate> {
    let scan = t_multivariate(series, grid, layout, cov, weights)?;
    let surface = StatSurface::from_scan(grid, &scan);
    Ok(Estimate {
        theta_hat: scan.params,
        surface,
    })
}

/// Maximizer of `A^P(θ) / (sum_t (D_θ(t/N) - mean D_θ)^2)^{1/2}`.
///
/// Grid points with a constant profile are skipped; only a grid where every
/// point is constant is an error.
pub fn estimate_projection(
    series: &MultiSeries,
    layout: &TransectLayout,
    grid: &ParamGrid,
    dir: &ProjectionDirection,
    cov: &CovModel,
) -> Result<Estimate> {
    // (N var)^{1/2} = sqrt(N) var^{1/2}, which is the β = 1/2 weight with unit σ̂
    let weights = WeightSpec::projection(0.5)?;
    let scan = t_projection(series, grid, layout, dir, cov, 1.0, &weights)?;
    let surface = StatSurface::from_scan(grid, &scan);
    Ok(Estimate {
        theta_hat: scan.params,
        surface,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    /// Opening angle attaining the cell value.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    /// Cells in order of first appearance in the grid.
    pub cells: Vec<HeatCell>,
    pub argmax: usize,
}

/// Maximum over opening angles for every source location.
pub fn reduce_surface(surface: &StatSurface) -> Heatmap {
    let mut cells: Vec<HeatCell> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for e in &surface.entries {
        let Some(v) = e.value else { continue };
        let key = (e.params.x_s.to_bits(), e.params.y_s.to_bits());
        match index.get(&key) {
            Some(&k) => {
                let cell: &mut HeatCell = &mut cells[k];
                if v > cell.value {
                    cell.value = v;
                    cell.alpha = e.params.alpha;
                }
            }
            None => {
                index.insert(key, cells.len());
                cells.push(HeatCell {
                    x: e.params.x_s,
                    y: e.params.y_s,
                    value: v,
                    alpha: e.params.alpha,
                });
            }
        }
    }
    let best = surface.theta_hat();
    let argmax = index[&(best.x_s.to_bits(), best.y_s.to_bits())];
    Heatmap { cells, argmax }
}

/// Mean absolute boundary error `sum_i (|F̂ - F| + |Ĝ - G|) / (2d)`.
pub fn boundary_error(truth: &ChangeMap, estimate: &ChangeMap) -> f64 {
    let d = truth.d();
    let total: f64 = (0..d)
        .map(|i| (estimate.f[i] - truth.f[i]).abs() + (estimate.g[i] - truth.g[i]).abs())
        .sum();
    total / (2 * d) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cov::Provenance;
    use crate::geometry::{linear_change_map, GridMode, GridSpec};
    use crate::simulate::{gen_signal, signal_oracle_h, ErrorModel, SimDesign};
    use crate::stats::{centered_prefix, profile_values, Projection};

    fn design() -> (SimDesign, ParamGrid) {
        let design = SimDesign::paper(240, ErrorModel::IidGaussian, 1);
        let grid = GridSpec {
            x: [-1.0, 1.0, 0.5],
            y: [-2.0, 1.0, 1.0],
            angles: vec![10.0, 20.0, 30.0],
            mode: GridMode::Strict,
        }
        .build(&design.layout)
        .unwrap();
        (design, grid)
    }

    #[test]
    fn noiseless_multivariate_recovers_truth() {
        let (design, grid) = design();
        let x = gen_signal(&design).unwrap();
        let cov = CovModel::identity(6, Provenance::Known);
        let est =
            estimate_multivariate(&x, &design.layout, &grid, &cov, &WeightSpec::NONE).unwrap();
        assert_eq!(est.theta_hat, design.true_params);

        // exhaustive oracle: Σ Δ_i^2 h_θ(i)^2 is largest at the truth
        let truth = design.true_change_map();
        let delta = design.base_delta().unwrap();
        let oracle: Vec<f64> = grid
            .change_maps(&design.layout)
            .iter()
            .map(|cm| {
                (0..6)
                    .map(|i| (delta[i] * signal_oracle_h(&truth, cm, i)).powi(2))
                    .sum()
            })
            .collect();
        let best = oracle.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(oracle[est.surface.argmax], best);
    }

    #[test]
    fn noiseless_projection_recovers_truth() {
        let (design, grid) = design();
        let x = gen_signal(&design).unwrap();
        let cov = CovModel::identity(6, Provenance::Known);
        let dir = design.direction().unwrap();
        let est = estimate_projection(&x, &design.layout, &grid, &dir, &cov).unwrap();
        assert_eq!(est.theta_hat, design.true_params);

        // normalized correlation with the true profile, computed directly
        let proj = Projection::new(&dir, &cov).unwrap();
        let n = 240;
        let truth = profile_values(
            &design.true_change_map().all_index_bounds(n),
            &proj.coefficients,
            n,
        );
        let tm = truth.iter().sum::<f64>() / n as f64;
        let corr = |cm: &ChangeMap| {
            let d = profile_values(&cm.all_index_bounds(n), &proj.coefficients, n);
            let dm = d.iter().sum::<f64>() / n as f64;
            let num: f64 = d.iter().zip(&truth).map(|(a, b)| (a - dm) * (b - tm)).sum();
            let den: f64 = d.iter().map(|a| (a - dm).powi(2)).sum::<f64>().sqrt();
            num.abs() / den
        };
        let values: Vec<f64> = grid.change_maps(&design.layout).iter().map(corr).collect();
        let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let at = values[est.surface.argmax];
        assert!((at - best).abs() <= 1e-12 * best);
    }

    #[test]
    fn zero_data_picks_first_point() {
        let (design, grid) = design();
        let x = MultiSeries::new(vec![vec![0.0; 240]; 6]).unwrap();
        let cov = CovModel::identity(6, Provenance::Known);
        let est =
            estimate_multivariate(&x, &design.layout, &grid, &cov, &WeightSpec::NONE).unwrap();
        assert_eq!(est.surface.argmax, 0);
        assert_eq!(est.surface.near_ties.len(), grid.len());
    }

    #[test]
    fn argmax_invariances() {
        let (design, grid) = design();
        let x = crate::simulate::gen_dataset(&design).unwrap();
        let cov = CovModel::diagonal(vec![1.0, 1.5, 0.8, 1.1, 0.9, 1.2], Provenance::User).unwrap();
        let a = estimate_multivariate(&x, &design.layout, &grid, &cov, &WeightSpec::NONE).unwrap();
        let b = estimate_multivariate(
            &x,
            &design.layout,
            &grid,
            &cov.scaled(3.7).unwrap(),
            &WeightSpec::NONE,
        )
        .unwrap();
        assert_eq!(a.surface.argmax, b.surface.argmax);

        let dir = design.direction().unwrap();
        let p = estimate_projection(&x, &design.layout, &grid, &dir, &cov).unwrap();
        let q = estimate_projection(&x, &design.layout, &grid, &dir.scaled(5.0).unwrap(), &cov)
            .unwrap();
        assert_eq!(p.surface.argmax, q.surface.argmax);
    }

    #[test]
    fn coherent_with_test_statistic() {
        let (design, grid) = design();
        let x = crate::simulate::gen_dataset(&design.with_seed(17)).unwrap();
        let cov = CovModel::identity(6, Provenance::Known);
        let w = WeightSpec::multivariate(0.25).unwrap();
        let scan = t_multivariate(&x, &grid, &design.layout, &cov, &w).unwrap();
        let est = estimate_multivariate(&x, &design.layout, &grid, &cov, &w).unwrap();
        assert_eq!(scan.argmax, est.surface.argmax);
        assert_eq!(scan.params, est.theta_hat);
    }

    #[test]
    fn reduce_examples() {
        let (design, grid) = design();
        let x = crate::simulate::gen_dataset(&design).unwrap();
        let cov = CovModel::identity(6, Provenance::Known);
        let est =
            estimate_multivariate(&x, &design.layout, &grid, &cov, &WeightSpec::NONE).unwrap();
        let heat = reduce_surface(&est.surface);
        let top = heat.cells[heat.argmax].value;
        assert_eq!(top, est.surface.max_value);
        assert!(heat.cells.iter().all(|c| c.value <= top));

        // dropping an angle never increases reduced values
        let narrow = ParamGrid::from_points(
            grid.points
                .iter()
                .copied()
                .filter(|p| p.alpha != 30.0)
                .collect(),
            &design.layout,
            GridMode::Strict,
        )
        .unwrap();
        let small =
            estimate_multivariate(&x, &design.layout, &narrow, &cov, &WeightSpec::NONE).unwrap();
        let small_heat = reduce_surface(&small.surface);
        for c in &small_heat.cells {
            let big = heat
                .cells
                .iter()
                .find(|b| b.x == c.x && b.y == c.y)
                .unwrap();
            assert!(big.value >= c.value);
        }

        // single angle reduces to the identity
        let single = ParamGrid::from_points(
            grid.points
                .iter()
                .copied()
                .filter(|p| p.alpha == 20.0)
                .collect(),
            &design.layout,
            GridMode::Strict,
        )
        .unwrap();
        let s =
            estimate_multivariate(&x, &design.layout, &single, &cov, &WeightSpec::NONE).unwrap();
        let h = reduce_surface(&s.surface);
        assert_eq!(h.cells.len(), single.len());
        for (c, e) in h.cells.iter().zip(&s.surface.entries) {
            assert_eq!(Some(c.value), e.value);
        }
    }

    #[test]
    fn boundary_error_examples() {
        let layout = crate::geometry::TransectLayout::reference(240);
        let a = linear_change_map(&layout, &PlumeParams::new(0.0, 0.0, 20.0).unwrap());
        assert_eq!(boundary_error(&a, &a), 0.0);
        let b = ChangeMap::new(vec![0.0; 6], vec![1.0; 6]).unwrap();
        let manual: f64 = (0..6).map(|i| a.f[i] + (1.0 - a.g[i])).sum::<f64>() / 12.0;
        assert!((boundary_error(&a, &b) - manual).abs() < 1e-15);
    }

    #[test]
    fn projection_surface_matches_direct_ratio() {
        let (design, grid) = design();
        let x = crate::simulate::gen_dataset(&design.with_seed(3)).unwrap();
        let cov = CovModel::identity(6, Provenance::Known);
        let dir = design.direction().unwrap();
        let est = estimate_projection(&x, &design.layout, &grid, &dir, &cov).unwrap();
        let proj = Projection::new(&dir, &cov).unwrap();
        let y = proj.apply(&x);
        let p = centered_prefix(&y);
        let n = 240;
        for (k, cm) in grid
            .change_maps(&design.layout)
            .iter()
            .enumerate()
            .step_by(7)
        {
            let d = profile_values(&cm.all_index_bounds(n), &proj.coefficients, n);
            let dm = d.iter().sum::<f64>() / n as f64;
            let ss: f64 = d.iter().map(|v| (v - dm).powi(2)).sum();
            let a: f64 = d
                .iter()
                .enumerate()
                .map(|(t, v)| v * (p[t + 1] - p[t]))
                .sum::<f64>()
                .abs();
            let expect = a / ss.sqrt();
            let got = est.surface.entries[k].value.unwrap();
            assert!((got - expect).abs() <= 1e-10 * expect.max(1e-300));
        }
    }
}
