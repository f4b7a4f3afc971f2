use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CsvFormat, DEFAULT_CATEGORICAL_THRESHOLD, DEFAULT_MAX_CATEGORY_VALUES};
use crate::preprocess::PreprocessConfig;
use crate::representation::PyramidConfig;

/// Names the JSON config file read by [`ServiceConfig::from_env`].
pub const CONFIG_ENV_VAR: &str = "SCATTERQUERY_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub default_k: usize,
    /// Collections with more specs are refused with `capacity-exceeded`.
    pub max_specs: usize,
    pub max_category_values: usize,
    pub categorical_threshold: usize,
    pub csv: CsvFormat,
    pub preprocess: PreprocessConfig,
    pub pyramid: PyramidConfig,
    pub preview_points: usize,
    pub preview_resolution: usize,
    /// Largest accepted request body, in bytes.
    pub max_upload_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            default_k: 20,
            max_specs: 5000,
            max_category_values: DEFAULT_MAX_CATEGORY_VALUES,
            categorical_threshold: DEFAULT_CATEGORICAL_THRESHOLD,
            csv: CsvFormat::default(),
            preprocess: PreprocessConfig::default(),
            pyramid: PyramidConfig::default(),
            preview_points: 500,
            preview_resolution: 8,
            max_upload_bytes: 64 << 20,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.pyramid.validate()?;
        if self.default_k == 0
            || self.max_specs == 0
            || self.preview_points == 0
            || self.max_upload_bytes == 0
        {
            return Err(Error::InvalidConfig(
                "default_k, max_specs, preview_points and max_upload_bytes must be positive".into(),
            ));
        }
        if !crate::representation::is_valid_resolution(self.preview_resolution) {
            return Err(Error::InvalidConfig(format!(
                "preview resolution {} is not a power of two",
                self.preview_resolution
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file named by `SCATTERQUERY_CONFIG`, or returns defaults
    /// when the variable is unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CONFIG_ENV_VAR) {
            Some(path) => Self::load(Path::new(&path)),
            None => Ok(Self::default()),
        }
    }
}
