//! Browser bindings: change maps, simulate-and-estimate heatmaps and null
//! distributions on the six-transect reference layout.
//!
//! Every export takes and returns JSON strings. The `*_json` functions hold
//! the logic and run natively; the exported wrappers only convert errors.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use plumetrace::cov::{CovModel, Provenance};
use plumetrace::estimate::{boundary_error, reduce_surface, Heatmap};
use plumetrace::geometry::{linear_change_map, ChangeMap, GridSpec, PlumeParams, TransectLayout};
use plumetrace::limits::mc_null_multivariate;
use plumetrace::{
    estimate_multivariate, estimate_projection, gen_dataset, ErrorModel, SimDesign, WeightSpec,
};

/// Largest series length accepted from the page.
pub const MAX_N: usize = 4000;
/// Largest replicate count accepted from the page.
pub const MAX_REPS: usize = 20_000;

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn layout(n: usize) -> Result<TransectLayout, String> {
    if !(2..=MAX_N).contains(&n) {
        return Err(format!("n must lie in 2..={MAX_N}"));
    }
    Ok(TransectLayout::reference(n))
}

fn params(x_s: f64, y_s: f64, alpha: f64) -> Result<PlumeParams, String> {
    PlumeParams::new(x_s, y_s, alpha).map_err(err)
}

#[derive(Debug, Serialize)]
struct TransectRegion {
    y: f64,
    f: f64,
    g: f64,
    /// First and last shifted time index, 1-based and inclusive.
    start: usize,
    end: usize,
}

/// Change region of each transect for one plume.
pub fn change_map_json(n: usize, x_s: f64, y_s: f64, alpha: f64) -> Result<String, String> {
    let layout = layout(n)?;
    let cm = linear_change_map(&layout, &params(x_s, y_s, alpha)?);
    let regions: Vec<TransectRegion> = layout
        .transects
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (lo, hi) = cm.index_bounds(i, n);
            TransectRegion {
                y: t.y,
                f: cm.f[i],
                g: cm.g[i],
                start: lo + 1,
                end: hi,
            }
        })
        .collect();
    serde_json::to_string(&regions).map_err(err)
}

#[derive(Debug, Deserialize)]
pub struct SimRequest {
    pub n: usize,
    pub x_s: f64,
    pub y_s: f64,
    pub alpha: f64,
    #[serde(default = "unit")]
    pub delta_norm: f64,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Serialize)]
struct StatView {
    theta_hat: PlumeParams,
    boundary_error: f64,
    heatmap: Heatmap,
}

#[derive(Debug, Serialize)]
struct SimResponse {
    truth: PlumeParams,
    grid_size: usize,
    multivariate: StatView,
    projection: StatView,
}

/// Simulates one i.i.d. dataset and returns both reduced surfaces. The
/// covariance is the known identity and the direction is the true one.
pub fn simulate_estimate_json(request: &str) -> Result<String, String> {
    let req: SimRequest = serde_json::from_str(request).map_err(err)?;
    let layout = layout(req.n)?;
    let truth = params(req.x_s, req.y_s, req.alpha)?;
    let mut design = SimDesign::paper(req.n, ErrorModel::IidGaussian, req.seed);
    design.true_params = truth;
    design.delta_norm = req.delta_norm;
    let series = gen_dataset(&design).map_err(err)?;
    let grid = req.grid.build(&layout).map_err(err)?;
    let cov = CovModel::identity(layout.d(), Provenance::Known);
    let truth_map = linear_change_map(&layout, &truth);

    let view = |theta: PlumeParams, surface| -> StatView {
        let est: ChangeMap = linear_change_map(&layout, &theta);
        StatView {
            theta_hat: theta,
            boundary_error: boundary_error(&truth_map, &est),
            heatmap: reduce_surface(surface),
        }
    };
    let m = estimate_multivariate(&series, &layout, &grid, &cov, &WeightSpec::NONE).map_err(err)?;
    let p = estimate_projection(
        &series,
        &layout,
        &grid,
        &design.direction().map_err(err)?,
        &cov,
    )
    .map_err(err)?;
    let response = SimResponse {
        truth,
        grid_size: grid.len(),
        multivariate: view(m.theta_hat, &m.surface),
        projection: view(p.theta_hat, &p.surface),
    };
    serde_json::to_string(&response).map_err(err)
}

#[derive(Debug, Serialize)]
struct NullResponse {
    reps: usize,
    quantile_level: f64,
    quantile: f64,
    values: Vec<f64>,
}

/// Simulated null law of the multivariate statistic over a grid.
pub fn null_distribution_json(
    n: usize,
    grid: &str,
    reps: usize,
    seed: u64,
    level: f64,
) -> Result<String, String> {
    if reps > MAX_REPS {
        return Err(format!("reps must not exceed {MAX_REPS}"));
    }
    let layout = layout(n)?;
    let spec: GridSpec = serde_json::from_str(grid).map_err(err)?;
    let grid = spec.build(&layout).map_err(err)?;
    let table = mc_null_multivariate(&layout, &grid, &WeightSpec::NONE, reps, seed).map_err(err)?;
    let quantile = table.quantile(level).map_err(err)?;
    serde_json::to_string(&NullResponse {
        reps,
        quantile_level: level,
        quantile,
        values: table.values,
    })
    .map_err(err)
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = changeMap)]
pub fn change_map(n: usize, x_s: f64, y_s: f64, alpha: f64) -> Result<String, JsError> {
    js(change_map_json(n, x_s, y_s, alpha))
}

#[wasm_bindgen(js_name = simulateEstimate)]
pub fn simulate_estimate(request: &str) -> Result<String, JsError> {
    js(simulate_estimate_json(request))
}

#[wasm_bindgen(js_name = nullDistribution)]
pub fn null_distribution(
    n: usize,
    grid: &str,
    reps: usize,
    seed: u32,
    level: f64,
) -> Result<String, JsError> {
    js(null_distribution_json(n, grid, reps, seed.into(), level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    const GRID: &str = r#"{"x": [-0.5, 0.5, 0.25], "y": [-1, 0, 0.5], "angles": [10, 20, 30]}"#;

    #[test]
    fn change_map_regions_widen_downwind() {
        let v: Value =
            serde_json::from_str(&change_map_json(240, 0.0, 0.0, 20.0).unwrap()).unwrap();
        let regions = v.as_array().unwrap();
        assert_eq!(regions.len(), 6);
        let width = |r: &Value| r["g"].as_f64().unwrap() - r["f"].as_f64().unwrap();
        for w in regions.windows(2) {
            assert!(width(&w[1]) > width(&w[0]));
        }
        let r = &regions[0];
        assert_eq!(
            r["start"],
            (r["f"].as_f64().unwrap() * 240.0).floor() as u64 + 1
        );
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(change_map_json(1, 0.0, 0.0, 20.0).is_err());
        assert!(change_map_json(240, 0.0, 0.0, -5.0).is_err());
        assert!(simulate_estimate_json("{").is_err());
        assert!(null_distribution_json(240, GRID, 10, 0, 0.95).is_err());
        assert!(null_distribution_json(240, GRID, MAX_REPS + 1, 0, 0.95).is_err());
    }

    #[test]
    fn strong_signal_is_located() {
        let req = format!(
            r#"{{"n": 240, "x_s": 0, "y_s": 0, "alpha": 20, "delta_norm": 20, "seed": 3, "grid": {GRID}}}"#
        );
        let v: Value = serde_json::from_str(&simulate_estimate_json(&req).unwrap()).unwrap();
        for stat in ["multivariate", "projection"] {
            assert_eq!(v[stat]["theta_hat"]["alpha"], 20.0, "{stat}");
            assert_eq!(v[stat]["boundary_error"], 0.0, "{stat}");
            let cells = v[stat]["heatmap"]["cells"].as_array().unwrap().len();
            assert!(cells > 0 && cells <= 25);
        }
        assert!(v["grid_size"].as_u64().unwrap() <= 75);
    }

    #[test]
    fn null_values_are_sorted_and_quantile_is_one_of_them() {
        let v: Value =
            serde_json::from_str(&null_distribution_json(120, GRID, 200, 9, 0.95).unwrap())
                .unwrap();
        let values: Vec<f64> = serde_json::from_value(v["values"].clone()).unwrap();
        assert_eq!(values.len(), 200);
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(v["quantile"].as_f64().unwrap(), values[189]);
    }
}
