//! Run configuration: a JSON file overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use plumetrace::geometry::{GridMode, GridSpec, ParamGrid, PlumeParams, TransectLayout};
use plumetrace::limits::MIN_REPS;
use plumetrace::lrv::BandwidthRule;

use crate::error::{CliError, Result};
use crate::io::read_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StatChoice {
    Mult,
    Proj,
    #[default]
    Both,
}

impl StatChoice {
    pub fn mult(self) -> bool {
        self != StatChoice::Proj
    }

    pub fn proj(self) -> bool {
        self != StatChoice::Mult
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovSource {
    #[default]
    Estimate,
    File(PathBuf),
}

fn default_alpha() -> f64 {
    0.05
}

fn default_reps() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub series: Option<PathBuf>,
    pub layout: PathBuf,
    pub grid: PathBuf,
    #[serde(default)]
    pub stat: StatChoice,
    pub direction: Option<PathBuf>,
    #[serde(default)]
    pub cov: CovSource,
    #[serde(default)]
    pub bandwidth: BandwidthRule,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_alpha")]
    pub alpha_level: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Flags that override configuration values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub stat: Option<StatChoice>,
    pub beta: Option<f64>,
    pub alpha_level: Option<f64>,
    pub reps: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Validated run configuration with paths resolved against the config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub series: Option<PathBuf>,
    pub layout: PathBuf,
    pub grid: PathBuf,
    pub stat: StatChoice,
    pub direction: Option<PathBuf>,
    pub cov: CovSource,
    pub bandwidth: BandwidthRule,
    pub beta: f64,
    pub alpha_level: f64,
    pub reps: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(path: &Path, o: &Overrides) -> Result<Self> {
        let file: RunConfigFile = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = RunConfig {
            series: file.series.map(|p| resolve(base, p)),
            layout: resolve(base, file.layout),
            grid: resolve(base, file.grid),
            stat: o.stat.unwrap_or(file.stat),
            direction: file.direction.map(|p| resolve(base, p)),
            cov: match file.cov {
                CovSource::File(p) => CovSource::File(resolve(base, p)),
                CovSource::Estimate => CovSource::Estimate,
            },
            bandwidth: file.bandwidth,
            beta: o.beta.unwrap_or(file.beta),
            alpha_level: o.alpha_level.unwrap_or(file.alpha_level),
            reps: o.reps.unwrap_or(file.reps),
            seed: o.seed.unwrap_or(file.seed),
            threads: o.threads.or(file.threads),
            out: o
                .out
                .clone()
                .or(file.out.map(|p| resolve(base, p)))
                .unwrap_or_else(|| PathBuf::from("plumetrace-out")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(CliError::Usage(format!(
                "alpha level {} must lie in (0, 1)",
                self.alpha_level
            )));
        }
        if self.reps < MIN_REPS {
            return Err(CliError::Usage(format!(
                "reps {} below the minimum of {MIN_REPS}",
                self.reps
            )));
        }
        if !(0.0..=0.5).contains(&self.beta) {
            return Err(CliError::Usage(format!(
                "beta {} must lie in [0, 0.5]",
                self.beta
            )));
        }
        if self.stat.proj() && self.direction.is_none() {
            return Err(CliError::Usage(
                "the projection statistic needs a direction file".into(),
            ));
        }
        if !(self.bandwidth.c > 0.0 && self.bandwidth.c.is_finite())
            || self.bandwidth.run_length == Some(0)
        {
            return Err(CliError::Usage(
                "bandwidth needs c > 0 and a positive run length".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn series_path(&self) -> Result<&Path> {
        self.series
            .as_deref()
            .ok_or_else(|| CliError::Usage("configuration names no series file".into()))
    }

    pub fn load_layout(&self) -> Result<TransectLayout> {
        let layout: TransectLayout = read_json(&self.layout)?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn load_grid(&self, layout: &TransectLayout) -> Result<ParamGrid> {
        match read_json::<GridFile>(&self.grid)? {
            GridFile::Spec(spec) => Ok(spec.build(layout)?),
            GridFile::Points { points, mode } => Ok(ParamGrid::from_points(points, layout, mode)?),
        }
    }
}

/// Grid files hold either a lattice specification or explicit points.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridFile {
    Spec(GridSpec),
    Points {
        points: Vec<PlumeParams>,
        #[serde(default)]
        mode: GridMode,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn paths_resolve_and_flags_override() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(
            dir.path(),
            "run.json",
            r#"{"series": "x.csv", "layout": "l.json", "grid": "/abs/g.json",
                "stat": "mult", "cov": {"file": "cov.json"}, "reps": 200}"#,
        );
        let o = Overrides {
            reps: Some(500),
            seed: Some(3),
            ..Default::default()
        };
        let rc = RunConfig::load(&cfg, &o).unwrap();
        assert_eq!(rc.series.unwrap(), dir.path().join("x.csv"));
        assert_eq!(rc.grid, PathBuf::from("/abs/g.json"));
        assert_eq!(rc.cov, CovSource::File(dir.path().join("cov.json")));
        assert_eq!((rc.reps, rc.seed, rc.alpha_level), (500, 3, 0.05));
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let base = r#""layout": "l.json", "grid": "g.json", "stat": "mult""#;
        for extra in [
            r#", "bandwidth": {"c": 0}"#,
            r#", "alpha_level": 1.5"#,
            r#", "reps": 10"#,
            r#", "beta": 0.7"#,
        ] {
            let cfg = write(dir.path(), "run.json", &format!("{{{base}{extra}}}"));
            let err = RunConfig::load(&cfg, &Overrides::default()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{extra}: {err}");
        }
        let cfg = write(
            dir.path(),
            "run.json",
            r#"{"layout": "l.json", "grid": "g.json"}"#,
        );
        assert_eq!(
            RunConfig::load(&cfg, &Overrides::default())
                .unwrap_err()
                .exit_code(),
            2
        );
        let cfg = write(
            dir.path(),
            "run.json",
            r#"{"layout": "l.json", "grid": "g.json", "colour": 1}"#,
        );
        assert_eq!(
            RunConfig::load(&cfg, &Overrides::default())
                .unwrap_err()
                .exit_code(),
            3
        );
    }

    #[test]
    fn grid_file_forms() {
        let dir = tempfile::tempdir().unwrap();
        let layout = TransectLayout::reference(60);
        let spec = write(
            dir.path(),
            "spec.json",
            r#"{"x": [-0.5, 0.5, 0.5], "y": [-1, 0, 1], "angles": [20]}"#,
        );
        let points = write(
            dir.path(),
            "points.json",
            r#"{"points": [{"x_s": 0, "y_s": 0, "alpha": 20}]}"#,
        );
        let mut rc = RunConfig {
            series: None,
            layout: PathBuf::new(),
            grid: spec,
            stat: StatChoice::Mult,
            direction: None,
            cov: CovSource::Estimate,
            bandwidth: BandwidthRule::default(),
            beta: 0.0,
            alpha_level: 0.05,
            reps: 100,
            seed: 0,
            threads: None,
            out: PathBuf::new(),
        };
        assert_eq!(rc.load_grid(&layout).unwrap().len(), 6);
        rc.grid = points;
        assert_eq!(rc.load_grid(&layout).unwrap().len(), 1);
    }
}
