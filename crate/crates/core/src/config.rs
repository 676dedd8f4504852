//! Run configuration files (TOML).
//!
//! ```toml
//! catalog = "tetris7"
//! group = "learned"
//!
//! [engine]
//! alpha = 0.05
//! window_k = 5
//!
//! [novice]
//! preference = [0.05, 0.05, 0.7, 0.05, 0.05, 0.05, 0.05]
//! base_rectify = 0.1
//! boost = 0.1
//! skill = 0.0
//! learn_rate = 0.02
//! mistake_hazard = 0.6
//!
//! [[schedule.phases]]
//! label = "GuidedResponse"
//! steps = 60
//! reinforced = true
//! ```
//!
//! Every section is optional; missing values fall back to the catalog
//! defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::CatalogKind;
use crate::engine::{phi_for_window, EngineConfig};
use crate::sim::{GroupAssignment, NoviceProfile, PhaseSchedule, PopulationSpec};
use crate::{Error, Result};

/// Engine fields that may be overridden; `n` always comes from the catalog.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineOverrides {
    pub alpha: Option<f64>,
    pub window_k: Option<usize>,
    pub ewma_phi: Option<f64>,
    pub epsilon_floor: Option<f64>,
    pub sigma_multiplier: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub catalog: Option<CatalogKind>,
    pub group: Option<GroupAssignment>,
    #[serde(default)]
    pub engine: EngineOverrides,
    pub novice: Option<NoviceProfile>,
    pub schedule: Option<PhaseSchedule>,
    pub population: Option<PopulationSpec>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    pub fn catalog_or(&self, fallback: CatalogKind) -> CatalogKind {
        self.catalog.unwrap_or(fallback)
    }

    /// Engine configuration for `catalog`. An explicit `seed` wins over the
    /// file's seed. When only `window_k` is given, `ewma_phi` follows it.
    pub fn engine_config(&self, catalog: CatalogKind, seed: Option<u64>) -> Result<EngineConfig> {
        let base = catalog.default_config(0);
        let o = &self.engine;
        let window_k = o.window_k.unwrap_or(base.window_k);
        let config = EngineConfig {
            n: base.n,
            alpha: o.alpha.unwrap_or(base.alpha),
            window_k,
            ewma_phi: o.ewma_phi.unwrap_or_else(|| phi_for_window(window_k)),
            epsilon_floor: o.epsilon_floor.unwrap_or(base.epsilon_floor),
            sigma_multiplier: o.sigma_multiplier.unwrap_or(base.sigma_multiplier),
            seed: seed.or(o.seed).unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn schedule_for(&self, catalog: CatalogKind) -> PhaseSchedule {
        self.schedule.clone().unwrap_or_else(|| match catalog {
            CatalogKind::Robot4 => PhaseSchedule::robot(),
            CatalogKind::Tetris7 => PhaseSchedule::game(),
        })
    }

    /// The configured novice, or one with a clear favourite (reinforcer 1).
    pub fn novice_for(&self, catalog: CatalogKind) -> Result<NoviceProfile> {
        let n = catalog.size();
        let profile = self.novice.clone().unwrap_or_else(|| NoviceProfile {
            preference: NoviceProfile::sharp_preference(n, 1, 0.8),
            base_rectify: 0.1,
            boost: 0.8 / n as f64,
            skill: 0.0,
            learn_rate: 0.02,
            mistake_hazard: 0.7,
        });
        profile.validate()?;
        if profile.n() != n {
            return Err(Error::Config(format!(
                "novice has {} preferences but catalog {catalog} has {n} reinforcers",
                profile.n()
            )));
        }
        Ok(profile)
    }

    pub fn population_for(&self, catalog: CatalogKind) -> Result<PopulationSpec> {
        let spec = self
            .population
            .clone()
            .unwrap_or_else(|| PopulationSpec::responsive(catalog.size()));
        spec.validate()?;
        if spec.n != catalog.size() {
            return Err(Error::Config(format!(
                "population has n = {} but catalog {catalog} has {} reinforcers",
                spec.n,
                catalog.size()
            )));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Phase;

    #[test]
    fn empty_file_uses_catalog_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        let engine = cfg.engine_config(CatalogKind::Tetris7, Some(9)).unwrap();
        assert_eq!(engine, CatalogKind::Tetris7.default_config(9));
        assert_eq!(cfg.schedule_for(CatalogKind::Robot4), PhaseSchedule::robot());
        assert!(cfg.novice_for(CatalogKind::Robot4).is_ok());
    }

    #[test]
    fn parses_documented_example() {
        let text = r#"
catalog = "tetris7"
group = "learned"

[engine]
alpha = 0.05
window_k = 5
seed = 3

[novice]
preference = [0.05, 0.05, 0.7, 0.05, 0.05, 0.05, 0.05]
base_rectify = 0.1
boost = 0.1
skill = 0.0
learn_rate = 0.02
mistake_hazard = 0.6

[[schedule.phases]]
label = "GuidedResponse"
steps = 60
reinforced = true

[[schedule.phases]]
label = "Adaptation"
steps = 20
reinforced = false
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.catalog, Some(CatalogKind::Tetris7));
        assert_eq!(cfg.group, Some(GroupAssignment::Learned));
        let engine = cfg.engine_config(CatalogKind::Tetris7, None).unwrap();
        assert_eq!(engine.seed, 3);
        assert!((engine.ewma_phi - 1.0 / 3.0).abs() < 1e-15);
        let schedule = cfg.schedule_for(CatalogKind::Tetris7);
        assert_eq!(schedule.phases[1].label, Phase::Adaptation);
        assert_eq!(cfg.novice_for(CatalogKind::Tetris7).unwrap().true_preference(), 2);

        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(RunConfig::from_toml_str("unknown = 1").is_err());
        let cfg = RunConfig::from_toml_str("[engine]\nalpha = 0.5").unwrap();
        assert!(cfg.engine_config(CatalogKind::Robot4, None).is_err());
        let cfg = RunConfig::from_toml_str("[novice]\npreference=[0.5,0.5]\nbase_rectify=0.1\nboost=0.1\nskill=0.0\nlearn_rate=0.0\nmistake_hazard=0.5").unwrap();
        assert!(cfg.novice_for(CatalogKind::Robot4).is_err());
    }
}
