//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use plumetrace::cov::{CovModel, Provenance};
use plumetrace::estimate::{reduce_surface, Estimate, StatSurface};
use plumetrace::geometry::{ChangeMap, ParamGrid, PlumeParams, TransectLayout};
use plumetrace::limits::{
    fingerprint, mc_null_multivariate, mc_null_projection, misspecification_caveat, p_value,
    NullTable, StatKind,
};
use plumetrace::lrv::{diag_cov_with, projected_sigma_with};
use plumetrace::stats::Projection;
use plumetrace::{
    estimate_multivariate, estimate_projection, gen_dataset, t_multivariate, t_projection,
    ErrorModel, MultiSeries, ProjectionDirection, SimDesign, WeightSpec,
};

use crate::cache::{self, CacheStatus, TableKey};
use crate::config::{CovSource, Overrides, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{
    ensure_dir, read_cov, read_json, read_series, write_heatmap_csv, write_json, write_series,
    write_surface_csv,
};
use crate::svg;

/// Global flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub overrides: Overrides,
    pub noiseless: bool,
    pub regen: bool,
}

impl Globals {
    fn run_config(&self) -> Result<RunConfig> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| CliError::Usage("this subcommand needs --config".into()))?;
        RunConfig::load(path, &self.overrides)
    }

    fn out_dir(&self, default: &Path) -> PathBuf {
        self.overrides
            .out
            .clone()
            .unwrap_or_else(|| default.to_path_buf())
    }
}

/// Paper design length used when `simulate` runs without a design file.
pub const DEFAULT_N: usize = 240;

#[derive(Serialize)]
struct TruthFile<'a> {
    seed: u64,
    noiseless: bool,
    params: PlumeParams,
    mu: &'a [f64],
    delta: &'a [f64],
    change_map: ChangeMap,
}

pub fn simulate(g: &Globals) -> Result<()> {
    let mut design = match &g.config {
        Some(path) => read_json::<SimDesign>(path)?,
        None => SimDesign::paper(DEFAULT_N, ErrorModel::IidGaussian, 0),
    };
    if let Some(seed) = g.overrides.seed {
        design = design.with_seed(seed);
    }
    design.validate()?;
    let series = if g.noiseless {
        plumetrace::simulate::gen_signal(&design)?
    } else {
        gen_dataset(&design)?
    };
    let truth = series.truth.as_ref().expect("simulated series carry truth");
    let out = g.out_dir(Path::new("plumetrace-out"));
    ensure_dir(&out)?;
    write_series(&out.join("series.csv"), &series)?;
    write_json(
        &out.join("truth.json"),
        &TruthFile {
            seed: design.seed,
            noiseless: g.noiseless,
            params: truth.params,
            mu: &truth.mu,
            delta: &truth.delta,
            change_map: design.true_change_map(),
        },
    )?;
    write_json(&out.join("layout.json"), &design.layout)?;
    write_json(&out.join("direction.json"), &design.direction()?)?;
    println!(
        "wrote {} ({} x {})",
        out.join("series.csv").display(),
        series.n(),
        series.d()
    );
    Ok(())
}

/// Inputs shared by `estimate`, `test` and `heatmap`.
struct Inputs {
    cfg: RunConfig,
    layout: TransectLayout,
    grid: ParamGrid,
    series: Option<MultiSeries>,
    direction: Option<ProjectionDirection>,
    cov: Option<CovModel>,
}

impl Inputs {
    fn load(g: &Globals, need_series: bool) -> Result<Self> {
        let cfg = g.run_config()?;
        let layout = cfg.load_layout()?;
        let grid = cfg.load_grid(&layout)?;
        let series = match (&cfg.series, need_series) {
            (Some(p), _) => Some(read_series(p)?),
            (None, true) => {
                cfg.series_path()?;
                None
            }
            (None, false) => None,
        };
        if let Some(s) = &series {
            s.check_layout(&layout)?;
        }
        let direction = match &cfg.direction {
            Some(p) if cfg.stat.proj() => {
                Some(ProjectionDirection::new(read_json::<Vec<f64>>(p)?)?)
            }
            _ => None,
        };
        let cov = match (&cfg.cov, &series) {
            (CovSource::File(p), _) => Some(read_cov(p)?),
            (CovSource::Estimate, Some(s)) => Some(diag_cov_with(s, &cfg.bandwidth)?),
            (CovSource::Estimate, None) => None,
        };
        Ok(Self {
            cfg,
            layout,
            grid,
            series,
            direction,
            cov,
        })
    }

    fn series(&self) -> &MultiSeries {
        self.series.as_ref().expect("series loaded")
    }

    fn cov(&self) -> Result<&CovModel> {
        self.cov
            .as_ref()
            .ok_or_else(|| CliError::Usage("covariance \"estimate\" needs a series file".into()))
    }

    fn direction(&self) -> &ProjectionDirection {
        self.direction.as_ref().expect("validated with projection")
    }

    /// `σ̂ = 1` for a known covariance, otherwise the flat-top estimate for
    /// the projected residuals.
    fn sigma_hat(&self) -> Result<f64> {
        let cov = self.cov()?;
        if cov.provenance() == Provenance::Known {
            return Ok(1.0);
        }
        Ok(
            projected_sigma_with(self.series(), self.direction(), cov, &self.cfg.bandwidth)?
                .sigma2
                .sqrt(),
        )
    }

    fn mult(&self) -> Result<Estimate> {
        let weights = WeightSpec::multivariate(self.cfg.beta)?;
        Ok(estimate_multivariate(
            self.series(),
            &self.layout,
            &self.grid,
            self.cov()?,
            &weights,
        )?)
    }

    fn proj(&self) -> Result<Estimate> {
        Ok(estimate_projection(
            self.series(),
            &self.layout,
            &self.grid,
            self.direction(),
            self.cov()?,
        )?)
    }
}

#[derive(Serialize)]
struct StatReport {
    theta_hat: PlumeParams,
    max_value: f64,
    near_ties: Vec<PlumeParams>,
    skipped: Vec<PlumeParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_hat: Option<f64>,
}

impl StatReport {
    fn new(surface: &StatSurface, sigma_hat: Option<f64>) -> Self {
        let at = |k: &usize| surface.entries[*k].params;
        Self {
            theta_hat: surface.theta_hat(),
            max_value: surface.max_value,
            near_ties: surface.near_ties.iter().map(at).collect(),
            skipped: surface.skipped.iter().map(at).collect(),
            sigma_hat,
        }
    }
}

#[derive(Serialize)]
struct EstimateReport {
    grid_size: usize,
    cov_provenance: Provenance,
    sigma_diagonal: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    multivariate: Option<StatReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    projection: Option<StatReport>,
    runtime_seconds: f64,
}

fn write_heatmap(out: &Path, tag: &str, title: &str, surface: &StatSurface) -> Result<()> {
    let heat = reduce_surface(surface);
    write_heatmap_csv(&out.join(format!("heatmap_{tag}.csv")), &heat)?;
    let path = out.join(format!("heatmap_{tag}.svg"));
    std::fs::write(&path, svg::render(&heat, title)).map_err(|e| CliError::io(&path, e))
}

pub fn estimate(g: &Globals) -> Result<()> {
    let start = Instant::now();
    let inputs = Inputs::load(g, true)?;
    let out = inputs.cfg.out.clone();
    ensure_dir(&out)?;
    let cov = inputs.cov()?;
    let mut report = EstimateReport {
        grid_size: inputs.grid.len(),
        cov_provenance: cov.provenance(),
        sigma_diagonal: cov.variances(),
        multivariate: None,
        projection: None,
        runtime_seconds: 0.0,
    };
    if inputs.cfg.stat.mult() {
        let est = inputs.mult()?;
        write_surface_csv(&out.join("surface_mult.csv"), &est.surface)?;
        write_heatmap(&out, "mult", "multivariate statistic", &est.surface)?;
        report.multivariate = Some(StatReport::new(&est.surface, None));
    }
    if inputs.cfg.stat.proj() {
        let est = inputs.proj()?;
        write_surface_csv(&out.join("surface_proj.csv"), &est.surface)?;
        write_heatmap(&out, "proj", "projection statistic", &est.surface)?;
        report.projection = Some(StatReport::new(&est.surface, Some(inputs.sigma_hat()?)));
    }
    report.runtime_seconds = start.elapsed().as_secs_f64();
    write_json(&out.join("report.json"), &report)?;
    for (name, r) in [
        ("multivariate", &report.multivariate),
        ("projection", &report.projection),
    ] {
        if let Some(r) = r {
            let p = r.theta_hat;
            println!(
                "{name}: x_s={} y_s={} alpha={} ({} near ties)",
                p.x_s,
                p.y_s,
                p.alpha,
                r.near_ties.len()
            );
        }
    }
    Ok(())
}

pub fn heatmap(g: &Globals) -> Result<()> {
    let inputs = Inputs::load(g, true)?;
    let out = inputs.cfg.out.clone();
    ensure_dir(&out)?;
    if inputs.cfg.stat.mult() {
        write_heatmap(
            &out,
            "mult",
            "multivariate statistic",
            &inputs.mult()?.surface,
        )?;
    }
    if inputs.cfg.stat.proj() {
        write_heatmap(
            &out,
            "proj",
            "projection statistic",
            &inputs.proj()?.surface,
        )?;
    }
    println!("wrote heatmaps to {}", out.display());
    Ok(())
}

/// Fingerprint, generator and caveat for one null table.
struct TableJob<'a> {
    kind: StatKind,
    weights: WeightSpec,
    fingerprint: String,
    inputs: &'a Inputs,
}

impl<'a> TableJob<'a> {
    fn multivariate(inputs: &'a Inputs) -> Result<Self> {
        let weights = WeightSpec::multivariate(inputs.cfg.beta)?;
        let fp = fingerprint(
            StatKind::Multivariate,
            &inputs.layout,
            &inputs.grid,
            &weights,
            None,
        );
        Ok(Self {
            kind: StatKind::Multivariate,
            weights,
            fingerprint: fp,
            inputs,
        })
    }

    fn projection(inputs: &'a Inputs) -> Result<Self> {
        let weights = WeightSpec::projection(inputs.cfg.beta)?;
        let proj = Projection::new(inputs.direction(), inputs.cov()?)?;
        let fp = fingerprint(
            StatKind::Projection,
            &inputs.layout,
            &inputs.grid,
            &weights,
            Some(&proj.coefficients),
        );
        Ok(Self {
            kind: StatKind::Projection,
            weights,
            fingerprint: fp,
            inputs,
        })
    }

    fn key(&self) -> TableKey<'_> {
        TableKey {
            kind: self.kind,
            fingerprint: &self.fingerprint,
            seed: self.inputs.cfg.seed,
            reps: self.inputs.cfg.reps,
        }
    }

    fn generate(&self) -> plumetrace::Result<NullTable> {
        let i = self.inputs;
        match self.kind {
            StatKind::Multivariate => {
                mc_null_multivariate(&i.layout, &i.grid, &self.weights, i.cfg.reps, i.cfg.seed)
            }
            StatKind::Projection => mc_null_projection(
                &i.layout,
                &i.grid,
                i.direction(),
                i.cov.as_ref().expect("checked when fingerprinting"),
                &self.weights,
                i.cfg.reps,
                i.cfg.seed,
            ),
        }
    }

    /// Taken from the covariance of this run, since the multivariate table
    /// does not depend on it.
    fn caveat(&self, table: &NullTable) -> bool {
        self.inputs
            .cov
            .as_ref()
            .map_or(table.caveat, misspecification_caveat)
    }

    fn jobs(inputs: &'a Inputs) -> Result<Vec<Self>> {
        let mut jobs = Vec::new();
        if inputs.cfg.stat.mult() {
            jobs.push(Self::multivariate(inputs)?);
        }
        if inputs.cfg.stat.proj() {
            jobs.push(Self::projection(inputs)?);
        }
        Ok(jobs)
    }
}

#[derive(Serialize)]
struct TestEntry {
    stat_kind: StatKind,
    statistic: f64,
    p_value: f64,
    reject: bool,
    alpha_level: f64,
    critical_value: f64,
    argmax: PlumeParams,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_hat: Option<f64>,
    skipped: usize,
    fingerprint: String,
    reps: usize,
    seed: u64,
    caveat: bool,
}

#[derive(Serialize)]
struct TestReport {
    tests: Vec<TestEntry>,
}

pub fn test(g: &Globals) -> Result<()> {
    let inputs = Inputs::load(g, true)?;
    let cfg = &inputs.cfg;
    let dir = cache::cache_dir();
    let mut tests = Vec::new();
    for job in TableJob::jobs(&inputs)? {
        let (table, status) =
            cache::load_or_generate(&dir, &job.key(), g.regen, || job.generate())?;
        let (scan, sigma_hat) = match job.kind {
            StatKind::Multivariate => (
                t_multivariate(
                    inputs.series(),
                    &inputs.grid,
                    &inputs.layout,
                    inputs.cov()?,
                    &job.weights,
                )?,
                None,
            ),
            StatKind::Projection => {
                let sigma = inputs.sigma_hat()?;
                let scan = t_projection(
                    inputs.series(),
                    &inputs.grid,
                    &inputs.layout,
                    inputs.direction(),
                    inputs.cov()?,
                    sigma,
                    &job.weights,
                )?;
                (scan, Some(sigma))
            }
        };
        let p = p_value(&table, scan.value);
        if status != CacheStatus::Hit {
            eprintln!("{} table {:?}", job.kind.as_str(), status);
        }
        tests.push(TestEntry {
            stat_kind: job.kind,
            statistic: scan.value,
            p_value: p,
            reject: p <= cfg.alpha_level,
            alpha_level: cfg.alpha_level,
            critical_value: table.quantile(1.0 - cfg.alpha_level)?,
            argmax: scan.params,
            beta: cfg.beta,
            sigma_hat,
            skipped: scan.skipped.len(),
            fingerprint: table.fingerprint.clone(),
            reps: table.reps,
            seed: table.seed,
            caveat: job.caveat(&table),
        });
    }
    ensure_dir(&cfg.out)?;
    let report = TestReport { tests };
    write_json(&cfg.out.join("test_report.json"), &report)?;
    for t in &report.tests {
        println!(
            "{}: T={:.6} p={:.4} {}{}",
            t.stat_kind.as_str(),
            t.statistic,
            t.p_value,
            if t.reject { "reject" } else { "retain" },
            if t.caveat {
                " (caveat: covariance provenance)"
            } else {
                ""
            }
        );
    }
    Ok(())
}

pub const CRITVAL_LEVELS: [f64; 4] = [0.9, 0.95, 0.975, 0.99];

pub fn critvals(g: &Globals) -> Result<()> {
    let inputs = Inputs::load(g, false)?;
    let dir = cache::cache_dir();
    for job in TableJob::jobs(&inputs)? {
        let table = cache::store(&dir, &job.key(), || job.generate())?;
        let path = cache::cache_path(&dir, job.kind, &job.fingerprint);
        println!("{} {}", job.kind.as_str(), path.display());
        for (level, q) in table.quantiles(&CRITVAL_LEVELS)? {
            println!("  q{level} = {q:.6}");
        }
    }
    Ok(())
}
