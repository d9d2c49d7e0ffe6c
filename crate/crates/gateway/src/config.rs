//! Gateway configuration, partial updates, and the serve-time config file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use cascadeflow_core::{RouterPolicy, ScoreType, Specialization};
use serde::{Deserialize, Deserializer, Serialize};

use crate::backend::{BackendDescriptor, Task};
use crate::error::GatewayError;

/// Behaviour when the Teacher fails on an escalated request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradedMode {
    #[default]
    Fail,
    /// Serve the Student's answer, flagged `"degraded": true`.
    StudentOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    pub policy: RouterPolicy,
    pub student: BackendDescriptor,
    pub teacher: BackendDescriptor,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub degraded_mode: DegradedMode,
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        self.policy.validate().map_err(GatewayError::Config)?;
        if self.task == Task::Detection
            && (self.policy.specialization.is_some()
                || !matches!(
                    self.policy.score_type,
                    ScoreType::Energy | ScoreType::Random
                ))
        {
            return Err(GatewayError::InvalidConfig(
                "detection supports only unspecialized energy or random policies".into(),
            ));
        }
        self.student
            .validate()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        self.teacher
            .validate()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

fn double_option<'de, D, T>(deserializer: D) -> Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(deserializer).map(Some)
}

/// Partial policy; `specialization: null` clears it.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyUpdate {
    pub score_type: Option<ScoreType>,
    #[serde(default, with = "cascadeflow_core::threshold::option")]
    pub threshold: Option<f64>,
    pub random_rate: Option<f64>,
    #[serde(default, deserialize_with = "double_option")]
    pub specialization: Option<Option<Specialization>>,
}

impl PolicyUpdate {
    pub fn apply(&self, policy: &RouterPolicy) -> RouterPolicy {
        RouterPolicy {
            score_type: self.score_type.unwrap_or(policy.score_type),
            threshold: self.threshold.unwrap_or(policy.threshold),
            random_rate: self.random_rate.unwrap_or(policy.random_rate),
            specialization: self.specialization.unwrap_or(policy.specialization),
        }
    }
}

/// Body of `PUT /v1/config`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigUpdate {
    pub policy: Option<PolicyUpdate>,
    pub student: Option<BackendDescriptor>,
    pub teacher: Option<BackendDescriptor>,
    pub task: Option<Task>,
    pub degraded_mode: Option<DegradedMode>,
}

impl ConfigUpdate {
    pub fn threshold(t: f64) -> Self {
        Self {
            policy: Some(PolicyUpdate {
                threshold: Some(t),
                ..Default::default()
            }),
            ..Default::default()
        }
    }

    pub fn apply(&self, current: &GatewayConfig) -> GatewayConfig {
        GatewayConfig {
            policy: self
                .policy
                .as_ref()
                .map_or(current.policy, |p| p.apply(&current.policy)),
            student: self
                .student
                .clone()
                .unwrap_or_else(|| current.student.clone()),
            teacher: self
                .teacher
                .clone()
                .unwrap_or_else(|| current.teacher.clone()),
            task: self.task.unwrap_or(current.task),
            degraded_mode: self.degraded_mode.unwrap_or(current.degraded_mode),
        }
    }
}

pub fn parse_config_update(body: &[u8]) -> Result<ConfigUpdate, GatewayError> {
    serde_json::from_slice(body).map_err(|e| GatewayError::BadRequest(e.to_string()))
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_event_buffer() -> usize {
    256
}

fn default_histogram_edges() -> Vec<f64> {
    (-10..=30).map(f64::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    #[serde(default = "default_histogram_edges")]
    pub histogram_edges: Vec<f64>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            histogram_edges: default_histogram_edges(),
        }
    }
}

/// The `serve` config file (TOML).
///
/// ```toml
/// listen = "127.0.0.1:8080"
/// task = "classification"
/// degraded_mode = "fail"
/// curve = "curve.jsonl"
///
/// [policy]
/// score_type = "energy"
/// threshold = 3.0
///
/// [student]
/// kind = "replay"
/// dataset = "calib.jsonl"
///
/// [teacher]
/// kind = "remote"
/// url = "http://127.0.0.1:9000/infer"
/// ```
///
/// Relative paths resolve against the config file's directory. The
/// `CASCADEFLOW_LISTEN` environment variable overrides `listen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub policy: RouterPolicy,
    pub student: BackendDescriptor,
    pub teacher: BackendDescriptor,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub degraded_mode: DegradedMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
    #[serde(default = "default_event_buffer")]
    pub event_buffer: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stats: StatsConfig,
}

pub const LISTEN_ENV: &str = "CASCADEFLOW_LISTEN";

impl ServeConfig {
    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::InvalidConfig(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.student.resolve_relative(base);
        config.teacher.resolve_relative(base);
        if let Some(curve) = &mut config.curve {
            if curve.is_relative() {
                *curve = base.join(&*curve);
            }
        }
        if let Ok(listen) = std::env::var(LISTEN_ENV) {
            config.listen = listen
                .parse()
                .map_err(|e| GatewayError::InvalidConfig(format!("{LISTEN_ENV}={listen}: {e}")))?;
        }
        Ok(config)
    }

    pub fn gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            policy: self.policy,
            student: self.student.clone(),
            teacher: self.teacher.clone(),
            task: self.task,
            degraded_mode: self.degraded_mode,
        }
    }
}
