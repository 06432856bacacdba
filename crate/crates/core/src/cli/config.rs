use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::scenarios::ScenarioParams;

pub const SEED_ENV: &str = "RIESZ_SEED";

/// Everything a run needs besides the subcommand's own flags. Loaded from a
/// TOML file with flat sections, then overridden by `RIESZ_SEED` and flags.
/// Unless configured, the estimator uses every available core.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub scenario_params: ScenarioParams,
    pub estimator: EstimatorConfig,
    pub grid: GridConfig,
    pub distance: DistanceConfig,
    pub localize: LocalizeConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: None,
            scenario_params: ScenarioParams::default(),
            estimator: EstimatorConfig { workers: 0, ..EstimatorConfig::default() },
            grid: GridConfig::default(),
            distance: DistanceConfig::default(),
            localize: LocalizeConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub res: Option<usize>,
    /// Positivity cutoff as a fraction of the grid maximum.
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub segments: usize,
    pub iterations: usize,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig { segments: 32, iterations: 500 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeConfig {
    pub eps: f64,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        LocalizeConfig { eps: 0.1, lo: None, hi: None, center: None, radius: None }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Line-JSON destination; stdout when absent.
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config { path, reason: e.into_inner().message().trim().to_string() }
        })?;
        let table: toml::Table = text.parse().unwrap_or_default();
        if table.get("estimator").and_then(|e| e.get("workers")).is_none() {
            cfg.estimator.workers = 0;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_toml(&text)
    }

    /// `RIESZ_SEED` replaces the configured seed; flags are applied later.
    pub fn apply_env(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.estimator.seed = v.trim().parse().map_err(|_| Error::Config {
                path: SEED_ENV.into(),
                reason: format!("expected an unsigned 64-bit integer, got `{v}`"),
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.estimator.validate().map_err(|e| match e {
            Error::Range { name, reason } => Error::Config { path: format!("estimator.{name}"), reason },
            Error::NoSamples(reason) => Error::Config { path: "estimator.N".into(), reason: reason.into() },
            other => other,
        })?;
        if let (Some(lo), Some(hi)) = (&self.grid.lo, &self.grid.hi) {
            if lo.len() != hi.len() {
                return Err(Error::Config {
                    path: "grid.hi".into(),
                    reason: format!("has {} entries, grid.lo has {}", hi.len(), lo.len()),
                });
            }
        }
        if let Some(t) = self.grid.threshold {
            if !(t >= 0.0 && t < 1.0) {
                return Err(Error::Config { path: "grid.threshold".into(), reason: format!("{t} is not in [0, 1)") });
            }
        }
        if self.distance.segments < 4 {
            return Err(Error::Config { path: "distance.segments".into(), reason: "must be at least 4".into() });
        }
        if !(self.localize.eps > 0.0) {
            return Err(Error::Config { path: "localize.eps".into(), reason: "must be positive".into() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Truncation;

    #[test]
    fn flat_sections_parse() {
        let c = RunConfig::from_toml(
            "scenario = \"linear\"\n[estimator]\nN = 5000\nseed = 9\nr_min = \"off\"\n[grid]\nres = 21\n",
        )
        .unwrap();
        assert_eq!(c.scenario.as_deref(), Some("linear"));
        assert_eq!(c.estimator.n, 5000);
        assert_eq!(c.estimator.seed, 9);
        assert_eq!(c.estimator.truncation, Truncation::Off);
        assert_eq!(c.grid.res, Some(21));
        assert_eq!(c.estimator.p, 4.0);
        assert_eq!(c.estimator.workers, 0);
        let c = RunConfig::from_toml("[estimator]\nworkers = 2\n").unwrap();
        assert_eq!(c.estimator.workers, 2);
    }

    #[test]
    fn errors_carry_the_field_path() {
        match RunConfig::from_toml("[estimator]\nN = \"many\"\n") {
            Err(Error::Config { path, .. }) => assert_eq!(path, "estimator.N"),
            other => panic!("{other:?}"),
        }
        match RunConfig::from_toml("[estimator]\nbogus = 1\n") {
            Err(Error::Config { reason, .. }) => assert!(reason.contains("bogus"), "{reason}"),
            other => panic!("{other:?}"),
        }
        let mut c = RunConfig::default();
        c.estimator.n = 0;
        match c.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "estimator.N"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn env_seed_overrides_config() {
        let mut c = RunConfig::from_toml("[estimator]\nseed = 3\n").unwrap();
        c.apply_env(Some("11")).unwrap();
        assert_eq!(c.estimator.seed, 11);
        assert!(c.apply_env(Some("x")).is_err());
    }
}
