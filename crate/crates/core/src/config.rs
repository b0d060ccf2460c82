//! Run configuration shared by every CLI subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::priors::PriorConfig;
use crate::sim::{DEFAULT_BURN_IN, DEFAULT_RETENTION};
use crate::survey::SurveyDesign;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub burn_in: u32,
    /// Weeks of event history kept by the simulator.
    pub retention: u32,
    pub design: SurveyDesign,
    pub priors: PriorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 0,
            workers: 1,
            output_dir: PathBuf::from("out"),
            burn_in: DEFAULT_BURN_IN,
            retention: DEFAULT_RETENTION,
            design: SurveyDesign::default(),
            priors: PriorConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers < 1 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if self.design.tlfb_window > self.retention || self.design.casual_recall > self.retention {
            return Err(Error::InvalidConfig(format!(
                "recall windows exceed the simulator retention of {} weeks",
                self.retention
            )));
        }
        self.design.validate()?;
        self.priors.validate()
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn from_text(text: &str) -> std::result::Result<RunConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = RunConfig::from_text(&text).map_err(|m| Error::parse(path, m))?;
        config.validate()?;
        Ok(config)
    }
}
