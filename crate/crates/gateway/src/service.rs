//! The cascade gateway: Student first, score, route, escalate.

use std::sync::Arc;
use std::time::Instant;

use cascadeflow_core::calibration::{FixedHistogram, TradeoffCurve};
use cascadeflow_core::{LogitVector, RoutingDecision, ScoreType, Target};
use parking_lot::{Mutex, RwLock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::broadcast;

use crate::backend::{
    Backend, BackendDescriptor, BackendError, InferenceRequest, ModelOutput, Task,
};
use crate::config::{ConfigUpdate, DegradedMode, GatewayConfig};
use crate::error::GatewayError;
use crate::events::{EventFeed, RoutingEvent};
use crate::stats::{RuntimeStats, StatsAccumulator};

/// Body of `POST /v1/infer`. With `logits` set the Student backend is skipped
/// and the supplied vector is scored directly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<LogitVector>,
}

impl InferRequest {
    pub fn by_id(id: impl Into<String>) -> Self {
        Self {
            id: Some(id.into()),
            ..Default::default()
        }
    }

    fn backend_request(&self) -> InferenceRequest {
        InferenceRequest {
            id: self.id.clone(),
            input: self.input.clone(),
        }
    }
}

pub fn parse_infer_request(body: &[u8]) -> Result<InferRequest, GatewayError> {
    serde_json::from_slice(body).map_err(|e| GatewayError::BadRequest(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub prediction: Value,
    pub route: Target,
    pub score: f64,
    #[serde(with = "cascadeflow_core::threshold")]
    pub threshold: f64,
    pub student_latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_latency_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degraded: Option<bool>,
}

fn open_backend(descriptor: &BackendDescriptor, task: Task) -> Result<Arc<Backend>, GatewayError> {
    Backend::open(descriptor, task)
        .map(Arc::new)
        .map_err(|e| GatewayError::InvalidConfig(e.to_string()))
}

/// A config together with the backends opened for it. Swapped as a unit so a
/// request never sees a policy from one config and backends from another.
struct Active {
    config: GatewayConfig,
    student: Arc<Backend>,
    teacher: Arc<Backend>,
}

impl Active {
    fn open(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let student = open_backend(&config.student, config.task)?;
        let teacher = open_backend(&config.teacher, config.task)?;
        Ok(Self {
            config,
            student,
            teacher,
        })
    }

    /// Reuses already-open backends whose descriptor did not change.
    fn reopen(&self, config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let same_task = config.task == self.config.task;
        let pick = |descriptor: &BackendDescriptor,
                    old_descriptor: &BackendDescriptor,
                    old: &Arc<Backend>| {
            if same_task && descriptor == old_descriptor {
                Ok(old.clone())
            } else {
                open_backend(descriptor, config.task)
            }
        };
        let student = pick(&config.student, &self.config.student, &self.student)?;
        let teacher = pick(&config.teacher, &self.config.teacher, &self.teacher)?;
        Ok(Self {
            config,
            student,
            teacher,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GatewayOptions {
    pub histogram_edges: Vec<f64>,
    pub event_buffer: usize,
    pub seed: u64,
}

impl Default for GatewayOptions {
    fn default() -> Self {
        Self {
            histogram_edges: crate::config::StatsConfig::default().histogram_edges,
            event_buffer: 256,
            seed: 0,
        }
    }
}

pub struct Gateway {
    active: RwLock<Arc<Active>>,
    /// Serializes config updates: last acknowledged wins.
    update_lock: Mutex<()>,
    stats: Mutex<StatsAccumulator>,
    events: broadcast::Sender<RoutingEvent>,
    seq: Mutex<u64>,
    rng: Mutex<ChaCha8Rng>,
    curve: RwLock<Option<Arc<TradeoffCurve>>>,
}

impl Gateway {
    pub fn new(config: GatewayConfig, options: GatewayOptions) -> Result<Self, GatewayError> {
        let histogram = FixedHistogram::new(options.histogram_edges)
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        if options.event_buffer == 0 {
            return Err(GatewayError::InvalidConfig(
                "event_buffer must be positive".into(),
            ));
        }
        let (events, _) = broadcast::channel(options.event_buffer);
        Ok(Self {
            active: RwLock::new(Arc::new(Active::open(config)?)),
            update_lock: Mutex::new(()),
            stats: Mutex::new(StatsAccumulator::new(histogram)),
            events,
            seq: Mutex::new(0),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(options.seed)),
            curve: RwLock::new(None),
        })
    }

    pub fn get_config(&self) -> GatewayConfig {
        self.active.read().config.clone()
    }

    /// Validates, opens any changed backends, then swaps atomically. On error
    /// the previous config stays in place.
    pub fn update_config(&self, update: &ConfigUpdate) -> Result<GatewayConfig, GatewayError> {
        let _guard = self.update_lock.lock();
        let current = self.active.read().clone();
        let next = current.reopen(update.apply(&current.config))?;
        let config = next.config.clone();
        *self.active.write() = Arc::new(next);
        tracing::info!(threshold = config.policy.threshold, score = %config.policy.score_type, "config updated");
        Ok(config)
    }

    pub fn get_stats(&self) -> RuntimeStats {
        let active = self.active.read().clone();
        let (fs, ft) = (
            active.student.declared_cost(),
            active.teacher.declared_cost(),
        );
        self.stats.lock().snapshot(fs, ft)
    }

    pub fn reset_stats(&self) -> RuntimeStats {
        let active = self.active.read().clone();
        let (fs, ft) = (
            active.student.declared_cost(),
            active.teacher.declared_cost(),
        );
        let mut stats = self.stats.lock();
        stats.reset();
        stats.snapshot(fs, ft)
    }

    pub fn subscribe(&self) -> EventFeed {
        EventFeed::new(self.events.subscribe())
    }

    pub fn curve(&self) -> Option<Arc<TradeoffCurve>> {
        self.curve.read().clone()
    }

    pub fn set_curve(&self, curve: TradeoffCurve) -> Result<(), GatewayError> {
        curve.validate().map_err(GatewayError::Config)?;
        *self.curve.write() = Some(Arc::new(curve));
        Ok(())
    }

    fn draw(&self, score_type: ScoreType) -> Option<f64> {
        (score_type == ScoreType::Random).then(|| self.rng.lock().random::<f64>())
    }

    fn decide(
        &self,
        active: &Active,
        output: &ModelOutput,
    ) -> Result<RoutingDecision, GatewayError> {
        let policy = &active.config.policy;
        let draw = self.draw(policy.score_type);
        let decision = match active.config.task {
            Task::Classification => {
                let logits = output.logits.as_ref().ok_or_else(|| {
                    GatewayError::Student(BackendError::Malformed(
                        "student output has no logits".into(),
                    ))
                })?;
                policy.decide(logits, draw)
            }
            Task::Detection => {
                let sample = output.detection.as_ref().ok_or_else(|| {
                    GatewayError::Student(BackendError::Malformed(
                        "student output has no detection payload".into(),
                    ))
                })?;
                policy.decide_detection(sample, draw)
            }
        };
        decision.map_err(|e| match e {
            cascadeflow_core::Error::InvalidInput(m) => GatewayError::BadRequest(m),
            other => GatewayError::Config(other),
        })
    }

    pub async fn handle_infer(&self, request: InferRequest) -> Result<InferResponse, GatewayError> {
        let started = Instant::now();
        let active = self.active.read().clone();
        let backend_request = request.backend_request();

        let student_output = match &request.logits {
            Some(logits) => {
                if active.config.task != Task::Classification {
                    return Err(GatewayError::BadRequest(
                        "direct logits are only accepted for classification".into(),
                    ));
                }
                ModelOutput {
                    task: Task::Classification,
                    prediction: Value::from(logits.argmax()),
                    logits: Some(logits.clone()),
                    detection: None,
                    measured_latency_ms: 0.0,
                    cost: 0.0,
                }
            }
            None => active
                .student
                .infer(&backend_request)
                .await
                .map_err(GatewayError::Student)?,
        };
        let student_latency_ms = started.elapsed().as_secs_f64() * 1e3;
        let decision = self.decide(&active, &student_output)?;

        let mut teacher_latency_ms = None;
        let mut degraded = None;
        let prediction = match decision.target {
            Target::Student => student_output.prediction,
            Target::Teacher => {
                let teacher_started = Instant::now();
                let result = active.teacher.infer(&backend_request).await;
                teacher_latency_ms = Some(teacher_started.elapsed().as_secs_f64() * 1e3);
                match result {
                    Ok(output) => output.prediction,
                    Err(err) => match active.config.degraded_mode {
                        DegradedMode::Fail => return Err(GatewayError::Teacher(err)),
                        DegradedMode::StudentOnly => {
                            tracing::warn!(error = %err, "teacher failed; serving student answer");
                            degraded = Some(true);
                            student_output.prediction
                        }
                    },
                }
            }
        };
        let total_ms = started.elapsed().as_secs_f64() * 1e3;

        let seq = {
            let mut stats = self.stats.lock();
            stats.record(
                decision.target,
                degraded.is_some(),
                decision.score,
                student_latency_ms,
                total_ms,
            );
            let mut seq = self.seq.lock();
            *seq += 1;
            *seq
        };
        // no subscribers is not an error
        let _ = self.events.send(RoutingEvent {
            seq,
            id: request.id.clone(),
            route: decision.target,
            score: decision.score,
            latency_ms: total_ms,
            degraded: degraded.is_some(),
        });

        Ok(InferResponse {
            id: request.id,
            prediction,
            route: decision.target,
            score: decision.score,
            threshold: decision.threshold_used,
            student_latency_ms,
            teacher_latency_ms,
            degraded,
        })
    }
}
