//! Pipeline configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use geobehave::forest::{default_grid, ForestHyperparams};
use geobehave::geocode::MAX_LENGTH;
use geobehave::sensing::ActivityConfig;
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const DEFAULT_PORT: u16 = 8080;
pub const PORT_ENV: &str = "GEOBEHAVE_PORT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub accel: PathBuf,
    pub gps: PathBuf,
    pub poi: PathBuf,
    pub taxonomy: PathBuf,
}

impl Default for InputPaths {
    fn default() -> Self {
        InputPaths {
            accel: "accel.csv".into(),
            gps: "gps.csv".into(),
            poi: "pois.csv".into(),
            taxonomy: "taxonomy.txt".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: InputPaths,
    /// Geohash length of the analysis grid.
    pub length: usize,
    pub activity: ActivityConfig,
    /// Hyperparameter grid for model selection; the built-in grid when absent.
    pub grid: Option<Vec<ForestHyperparams>>,
    pub folds: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub host: String,
    pub port: u16,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inputs: InputPaths::default(),
            length: 6,
            activity: ActivityConfig::default(),
            grid: None,
            folds: 10,
            seed: 7,
            out_dir: "out".into(),
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Read a config file; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<PipelineConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.inputs.accel);
        resolve(base, &mut self.inputs.gps);
        resolve(base, &mut self.inputs.poi);
        resolve(base, &mut self.inputs.taxonomy);
        resolve(base, &mut self.out_dir);
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(1..=MAX_LENGTH).contains(&self.length) {
            return Err(UsageError(format!("length {} outside 1..={MAX_LENGTH}", self.length)).into());
        }
        if self.folds < 2 {
            return Err(UsageError("folds must be at least 2".into()).into());
        }
        self.activity.validate()?;
        Ok(())
    }

    /// The search grid with every entry seeded from the pipeline seed.
    pub fn search_grid(&self) -> Vec<ForestHyperparams> {
        match &self.grid {
            Some(g) => g.iter().map(|hp| hp.with_seed(self.seed)).collect(),
            None => default_grid(self.seed),
        }
    }

    /// Listen port, honoring the environment override.
    pub fn listen_port(&self) -> anyhow::Result<u16> {
        match std::env::var(PORT_ENV) {
            Ok(v) => v.parse().map_err(|_| UsageError(format!("{PORT_ENV}={v:?} is not a port")).into()),
            Err(_) => Ok(self.port),
        }
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}
