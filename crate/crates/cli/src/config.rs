//! Run configuration: a TOML file, overridden flag by flag.
//!
//! Defaults, all in one place:
//!
//! | key                               | default | meaning                                        |
//! |-----------------------------------|---------|------------------------------------------------|
//! | `seed`                            | 0       | seed for every randomized check                |
//! | `workers`                         | cores   | worker threads (`BESOVLAB_WORKERS` also works) |
//! | `tgrid.t_min`                     | "bulk"  | `bulk` = 0.1/lambda_max, `exact` = 0.01/lambda_max, or a number |
//! | `tgrid.t_max`                     | "bulk"  | `bulk` = 0.1/lambda_1, `spectral` = 1/lambda_1, or a number |
//! | `tgrid.points_per_decade`         | 16      | at least 4                                     |
//! | `rgrid.r_min`                     | "bulk"  | `bulk` = 3 mesh, `mesh`, or a number           |
//! | `rgrid.r_max`                     | "bulk"  | `bulk` = diameter/4, `diameter`, or a number   |
//! | `rgrid.count`                     | 10      | log-spaced radii, at least 4                   |
//! | `verify.trials`                   | 4       | random functions per exact check               |
//! | `verify.exact_points_per_decade`  | 8       | grid density of the exact checks               |
//! | `verify.sample_size`              | 2000    | sub-Gaussian samples                           |
//! | `tolerances.subgaussian_r2_min`   | 0.95    |                                                |
//! | `tolerances.perimeter_max_spread` | 20      |                                                |
//!
//! Exact-tier tolerances are fixed and cannot be overridden.

use std::path::Path;

use anyhow::{bail, Context, Result};
use besovlab::heat::SpectralHeatModel;
use besovlab::mmspace::MetricMeasureSpace;
use besovlab::verify::SuiteConfig;
use serde::{Deserialize, Serialize};

pub const WORKERS_ENV: &str = "BESOVLAB_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridBound {
    Named(String),
    Value(f64),
}

impl GridBound {
    pub fn parse(s: &str) -> Self {
        s.parse::<f64>().map(GridBound::Value).unwrap_or_else(|_| GridBound::Named(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGridSpec {
    pub t_min: GridBound,
    pub t_max: GridBound,
    pub points_per_decade: usize,
}

impl Default for TimeGridSpec {
    fn default() -> Self {
        TimeGridSpec {
            t_min: GridBound::Named("bulk".into()),
            t_max: GridBound::Named("bulk".into()),
            points_per_decade: 16,
        }
    }
}

impl TimeGridSpec {
    pub fn resolve(&self, model: &SpectralHeatModel<f64>) -> Result<Vec<f64>> {
        if self.points_per_decade < 4 {
            bail!("points_per_decade must be at least 4, got {}", self.points_per_decade);
        }
        let lo = match &self.t_min {
            GridBound::Value(v) => *v,
            GridBound::Named(s) if s == "bulk" => 0.1 / model.lambda_max(),
            GridBound::Named(s) if s == "exact" => 0.01 / model.lambda_max(),
            GridBound::Named(s) => bail!("unknown t_min rule {s:?}"),
        };
        let hi = match &self.t_max {
            GridBound::Value(v) => *v,
            GridBound::Named(s) if s == "bulk" => 0.1 / model.lambda_1(),
            GridBound::Named(s) if s == "spectral" => 1.0 / model.lambda_1(),
            GridBound::Named(s) => bail!("unknown t_max rule {s:?}"),
        };
        if !(lo > 0.0 && hi > lo) {
            bail!("time grid [{lo:e}, {hi:e}] is empty");
        }
        Ok(besovlab::fit::log_grid(lo, hi, self.points_per_decade))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiusGridSpec {
    pub r_min: GridBound,
    pub r_max: GridBound,
    pub count: usize,
}

impl Default for RadiusGridSpec {
    fn default() -> Self {
        RadiusGridSpec { r_min: GridBound::Named("bulk".into()), r_max: GridBound::Named("bulk".into()), count: 10 }
    }
}

impl RadiusGridSpec {
    pub fn resolve(&self, space: &MetricMeasureSpace<f64>) -> Result<Vec<f64>> {
        if self.count < 4 {
            bail!("radius count must be at least 4, got {}", self.count);
        }
        let (lo_bulk, hi_bulk) = space.radius_window();
        let lo = match &self.r_min {
            GridBound::Value(v) => *v,
            GridBound::Named(s) if s == "bulk" => lo_bulk,
            GridBound::Named(s) if s == "mesh" => space.meta.mesh,
            GridBound::Named(s) => bail!("unknown r_min rule {s:?}"),
        };
        let hi = match &self.r_max {
            GridBound::Value(v) => *v,
            GridBound::Named(s) if s == "bulk" => hi_bulk,
            GridBound::Named(s) if s == "diameter" => space.meta.diameter,
            GridBound::Named(s) => bail!("unknown r_max rule {s:?}"),
        };
        if !(lo > 0.0 && hi > lo) {
            bail!("radius window [{lo:e}, {hi:e}] is empty; try r_min = \"mesh\" on coarse spaces");
        }
        Ok(besovlab::fit::log_space(lo, hi, self.count))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub trials: usize,
    pub exact_points_per_decade: usize,
    pub sample_size: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        let d = SuiteConfig::default();
        VerifySpec { trials: d.trials, exact_points_per_decade: d.points_per_decade, sample_size: d.sample_size }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub subgaussian_r2_min: f64,
    pub perimeter_max_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = SuiteConfig::default();
        Tolerances { subgaussian_r2_min: d.subgaussian_r2_min, perimeter_max_spread: d.perimeter_max_spread }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: Option<usize>,
    pub tgrid: TimeGridSpec,
    pub rgrid: RadiusGridSpec,
    pub verify: VerifySpec,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            seed: self.seed,
            trials: self.verify.trials,
            points_per_decade: self.verify.exact_points_per_decade,
            sample_size: self.verify.sample_size,
            subgaussian_r2_min: self.tolerances.subgaussian_r2_min,
            perimeter_max_spread: self.tolerances.perimeter_max_spread,
        }
    }

    /// Flag, then config, then environment; `None` leaves rayon's default.
    pub fn worker_count(&self, flag: Option<usize>) -> Result<Option<usize>> {
        if let Some(n) = flag.or(self.workers) {
            return Ok(Some(n));
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{WORKERS_ENV}={v:?} is not a count"))?)),
            Err(_) => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c: RunConfig = toml::from_str("seed = 7\n[tgrid]\nt_min = \"exact\"\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.tgrid.t_min, GridBound::Named("exact".into()));
        assert_eq!(c.tgrid.points_per_decade, 16);
        assert_eq!(c.verify, VerifySpec::default());
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        let c: RunConfig = toml::from_str("[tgrid]\nt_max = 0.5\n").unwrap();
        assert_eq!(c.tgrid.t_max, GridBound::Value(0.5));
    }
}
