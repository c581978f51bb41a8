//! Simulation configuration file: `[robot]`, `[camera]`, `[planner]`, `[time-model]` and
//! `[semantics]` tables, each optional and filled from defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::planner::{CameraModel, PlannerParams, RobotModel};
use crate::scene::SimSetup;
use crate::search::TimeModel;
use crate::semantics::{KnowledgeBase, LlmEndpoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticsConfig {
    /// Knowledge-base JSON; the shipped one when absent.
    pub knowledge_base: Option<PathBuf>,
    pub endpoint: LlmEndpoint,
    /// Re-prompts after an unusable answer.
    pub retry_budget: usize,
    /// Extra attempts after a transport error.
    pub transport_retries: usize,
}

impl Default for SemanticsConfig {
    fn default() -> Self {
        Self { knowledge_base: None, endpoint: LlmEndpoint::default(), retry_budget: 2, transport_retries: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Config {
    pub robot: RobotModel,
    pub camera: CameraModel,
    pub planner: PlannerParams,
    pub time_model: TimeModel,
    pub semantics: SemanticsConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.robot.validate().map_err(|e| invalid(e.to_string()))?;
        self.camera.validate().map_err(|e| invalid(e.to_string()))?;
        let p = &self.planner;
        if !(p.coverage_target > 0.0 && p.coverage_target <= 1.0) {
            return Err(invalid(format!("planner.coverage_target {} outside (0, 1]", p.coverage_target)));
        }
        if p.max_views == 0 || p.max_views_per_chassis == 0 {
            return Err(invalid("planner view budgets must be positive".into()));
        }
        let t = &self.time_model;
        if !(t.base_speed > 0.0 && t.ee_speed > 0.0 && t.inspect_seconds >= 0.0 && t.open_seconds >= 0.0) {
            return Err(invalid("time-model speeds must be positive and durations non-negative".into()));
        }
        Ok(())
    }

    pub fn setup(&self) -> SimSetup {
        SimSetup { camera: self.camera, robot: self.robot.clone(), planner: self.planner.clone() }
    }

    pub fn knowledge_base(&self) -> Result<KnowledgeBase, ConfigError> {
        match &self.semantics.knowledge_base {
            Some(p) => KnowledgeBase::load(p).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display()))),
            None => Ok(KnowledgeBase::shipped()),
        }
    }
}
