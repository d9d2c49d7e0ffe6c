//! Model backends: file replay of precomputed outputs, and remote HTTP models.
//!
//! Remote wire schema (POST to the descriptor URL):
//!
//! ```text
//! request  {"id": str?, "input": any?}
//! response {"task": "classification"|"detection", "logits": [num..]?,
//!           "detection": {"boxes": [..]}?, "prediction": any?}
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use cascadeflow_core::dataset::{
    load_classification_dataset, load_detection_dataset, CalibrationRecord,
};
use cascadeflow_core::energy::DetectionSample;
use cascadeflow_core::LogitVector;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::Semaphore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Classification,
    Detection,
}

/// Which model's columns a classification replay dataset serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Student,
    Teacher,
}

fn default_timeout_ms() -> u64 {
    5_000
}

fn default_max_in_flight() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendDescriptor {
    Replay {
        dataset: PathBuf,
        #[serde(default)]
        side: Side,
        /// Per-call cost; falls back to the dataset's per-record costs.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cost: Option<f64>,
    },
    Remote {
        url: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cost: Option<f64>,
        #[serde(default = "default_max_in_flight")]
        max_in_flight: usize,
    },
}

impl BackendDescriptor {
    pub fn replay(dataset: impl Into<PathBuf>, side: Side) -> Self {
        BackendDescriptor::Replay {
            dataset: dataset.into(),
            side,
            cost: None,
        }
    }

    pub fn remote(url: impl Into<String>) -> Self {
        BackendDescriptor::Remote {
            url: url.into(),
            timeout_ms: default_timeout_ms(),
            cost: None,
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn cost(&self) -> Option<f64> {
        match self {
            BackendDescriptor::Replay { cost, .. } | BackendDescriptor::Remote { cost, .. } => {
                *cost
            }
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if let Some(c) = self.cost() {
            if !(c.is_finite() && c >= 0.0) {
                return Err(BackendError::Invalid(format!(
                    "backend cost must be finite and non-negative, got {c}"
                )));
            }
        }
        if let BackendDescriptor::Remote {
            url,
            timeout_ms,
            max_in_flight,
            ..
        } = self
        {
            if *timeout_ms == 0 {
                return Err(BackendError::Invalid("timeout_ms must be positive".into()));
            }
            if *max_in_flight == 0 {
                return Err(BackendError::Invalid(
                    "max_in_flight must be positive".into(),
                ));
            }
            let parsed = reqwest::Url::parse(url)
                .map_err(|e| BackendError::Invalid(format!("bad url '{url}': {e}")))?;
            if parsed.scheme() != "http" {
                return Err(BackendError::Invalid(format!(
                    "unsupported url scheme '{}'",
                    parsed.scheme()
                )));
            }
        }
        Ok(())
    }

    /// Resolves a relative replay path against `base`.
    pub fn resolve_relative(&mut self, base: &Path) {
        if let BackendDescriptor::Replay { dataset, .. } = self {
            if dataset.is_relative() {
                *dataset = base.join(&*dataset);
            }
        }
    }
}

/// What a backend is asked to run on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InferenceRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Value>,
}

impl InferenceRequest {
    pub fn by_id(id: impl Into<String>) -> Self {
        Self {
            id: Some(id.into()),
            input: None,
        }
    }
}

/// One model's answer. Classification outputs carry `logits` unless the
/// source only knows the predicted class; detection outputs carry
/// `detection`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<LogitVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionSample>,
    pub prediction: Value,
    pub measured_latency_ms: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("sample '{0}' not found")]
    NotFound(String),
    #[error("backend timed out after {0} ms")]
    Timeout(u64),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("invalid backend request: {0}")]
    Invalid(String),
    #[error("failed to load replay dataset: {0}")]
    Load(String),
}

fn default_prediction(logits: Option<&LogitVector>, detection: Option<&DetectionSample>) -> Value {
    match (logits, detection) {
        (Some(l), _) => Value::from(l.argmax()),
        (None, Some(d)) => Value::from(
            d.boxes()
                .iter()
                .map(|b| b.class_logits.argmax())
                .collect::<Vec<_>>(),
        ),
        (None, None) => Value::Null,
    }
}

#[derive(Deserialize)]
struct RemoteResponse {
    task: Task,
    #[serde(default)]
    logits: Option<LogitVector>,
    #[serde(default)]
    detection: Option<DetectionSample>,
    #[serde(default)]
    prediction: Option<Value>,
}

/// Decodes and validates a remote model response body. Latency and cost are
/// left at zero for the caller to fill in.
pub fn decode_model_output(body: &[u8]) -> Result<ModelOutput, BackendError> {
    let raw: RemoteResponse =
        serde_json::from_slice(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    match (raw.task, &raw.logits, &raw.detection) {
        (Task::Classification, Some(_), None) | (Task::Detection, None, Some(_)) => {}
        (Task::Classification, None, None) if raw.prediction.is_some() => {}
        (task, _, _) => {
            return Err(BackendError::Malformed(format!(
                "{task:?} response must carry exactly the matching payload"
            )))
        }
    }
    let prediction = raw
        .prediction
        .unwrap_or_else(|| default_prediction(raw.logits.as_ref(), raw.detection.as_ref()));
    Ok(ModelOutput {
        task: raw.task,
        logits: raw.logits,
        detection: raw.detection,
        prediction,
        measured_latency_ms: 0.0,
        cost: 0.0,
    })
}

#[derive(Debug, Clone)]
struct ReplayEntry {
    logits: Option<LogitVector>,
    detection: Option<DetectionSample>,
    prediction: Value,
    cost: Option<f64>,
}

#[derive(Debug)]
pub struct ReplayBackend {
    task: Task,
    entries: HashMap<String, ReplayEntry>,
    cost: Option<f64>,
    mean_record_cost: f64,
}

impl ReplayBackend {
    pub fn open(
        path: &Path,
        side: Side,
        task: Task,
        cost: Option<f64>,
    ) -> Result<Self, BackendError> {
        let load =
            |e: cascadeflow_core::Error| BackendError::Load(format!("{}: {e}", path.display()));
        let entries: HashMap<String, ReplayEntry> = match task {
            Task::Classification => {
                let records = load_classification_dataset(path).map_err(load)?;
                records
                    .into_iter()
                    .map(|r| classification_entry(r, side))
                    .collect::<Result<_, _>>()?
            }
            Task::Detection => load_detection_dataset(path)
                .map_err(load)?
                .into_iter()
                .map(|r| {
                    let prediction = r
                        .reference
                        .clone()
                        .unwrap_or_else(|| default_prediction(None, Some(&r.sample)));
                    (
                        r.id,
                        ReplayEntry {
                            logits: None,
                            detection: Some(r.sample),
                            prediction,
                            cost: None,
                        },
                    )
                })
                .collect(),
        };
        let costs: Vec<f64> = entries.values().filter_map(|e| e.cost).collect();
        let mean_record_cost = if costs.is_empty() {
            0.0
        } else {
            costs.iter().sum::<f64>() / costs.len() as f64
        };
        Ok(Self {
            task,
            entries,
            cost,
            mean_record_cost,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, request: &InferenceRequest) -> Result<ModelOutput, BackendError> {
        let id = request
            .id
            .as_deref()
            .ok_or_else(|| BackendError::Invalid("replay backends need a sample id".into()))?;
        let entry = self
            .entries
            .get(id)
            .ok_or_else(|| BackendError::NotFound(id.to_string()))?;
        Ok(ModelOutput {
            task: self.task,
            logits: entry.logits.clone(),
            detection: entry.detection.clone(),
            prediction: entry.prediction.clone(),
            measured_latency_ms: 0.0,
            cost: self.cost.or(entry.cost).unwrap_or(0.0),
        })
    }
}

fn classification_entry(
    record: CalibrationRecord,
    side: Side,
) -> Result<(String, ReplayEntry), BackendError> {
    let entry = match side {
        Side::Student => ReplayEntry {
            prediction: Value::from(record.student_prediction()),
            logits: Some(record.student_logits),
            detection: None,
            cost: record.student_cost,
        },
        Side::Teacher => {
            let prediction = record.teacher_prediction().ok_or_else(|| {
                BackendError::Load(format!(
                    "record '{}' has neither teacher_logits nor teacher_pred",
                    record.id
                ))
            })?;
            ReplayEntry {
                prediction: Value::from(prediction),
                logits: record.teacher_logits,
                detection: None,
                cost: record.teacher_cost,
            }
        }
    };
    Ok((record.id, entry))
}

#[derive(Debug)]
pub struct RemoteBackend {
    task: Task,
    url: String,
    timeout_ms: u64,
    cost: f64,
    client: reqwest::Client,
    permits: Arc<Semaphore>,
}

impl RemoteBackend {
    pub fn new(
        url: &str,
        timeout_ms: u64,
        cost: f64,
        max_in_flight: usize,
        task: Task,
    ) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| BackendError::Invalid(e.to_string()))?;
        Ok(Self {
            task,
            url: url.to_string(),
            timeout_ms,
            cost,
            client,
            permits: Arc::new(Semaphore::new(max_in_flight)),
        })
    }

    pub async fn call(&self, request: &InferenceRequest) -> Result<ModelOutput, BackendError> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|_| BackendError::Unavailable("backend closed".into()))?;
        let started = Instant::now();
        let response = self
            .client
            .post(&self.url)
            .json(request)
            .send()
            .await
            .map_err(|e| self.transport_error(e))?;
        let status = response.status();
        let body = response
            .bytes()
            .await
            .map_err(|e| self.transport_error(e))?;
        let latency = started.elapsed().as_secs_f64() * 1e3;
        if !status.is_success() {
            return Err(BackendError::Unavailable(format!(
                "{} returned {status}",
                self.url
            )));
        }
        let mut output = decode_model_output(&body)?;
        if output.task != self.task {
            return Err(BackendError::Malformed(format!(
                "expected a {:?} response, got {:?}",
                self.task, output.task
            )));
        }
        output.measured_latency_ms = latency;
        output.cost = self.cost;
        Ok(output)
    }

    fn transport_error(&self, err: reqwest::Error) -> BackendError {
        if err.is_timeout() {
            BackendError::Timeout(self.timeout_ms)
        } else {
            BackendError::Unavailable(err.to_string())
        }
    }
}

#[derive(Debug)]
pub enum Backend {
    Replay(ReplayBackend),
    Remote(RemoteBackend),
}

impl Backend {
    pub fn open(descriptor: &BackendDescriptor, task: Task) -> Result<Self, BackendError> {
        descriptor.validate()?;
        match descriptor {
            BackendDescriptor::Replay {
                dataset,
                side,
                cost,
            } => ReplayBackend::open(dataset, *side, task, *cost).map(Backend::Replay),
            BackendDescriptor::Remote {
                url,
                timeout_ms,
                cost,
                max_in_flight,
            } => RemoteBackend::new(url, *timeout_ms, cost.unwrap_or(0.0), *max_in_flight, task)
                .map(Backend::Remote),
        }
    }

    pub async fn infer(&self, request: &InferenceRequest) -> Result<ModelOutput, BackendError> {
        match self {
            Backend::Replay(replay) => replay.lookup(request),
            Backend::Remote(remote) => remote.call(request).await,
        }
    }

    /// Per-call cost used by the runtime cost estimate.
    pub fn declared_cost(&self) -> f64 {
        match self {
            Backend::Replay(r) => r.cost.unwrap_or(r.mean_record_cost),
            Backend::Remote(r) => r.cost,
        }
    }
}

/// One-shot inference against a descriptor. Opens the backend for each call;
/// long-lived callers should hold a [`Backend`] instead.
pub async fn backend_infer(
    descriptor: &BackendDescriptor,
    task: Task,
    request: &InferenceRequest,
) -> Result<ModelOutput, BackendError> {
    Backend::open(descriptor, task)?.infer(request).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn dataset() -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"a","label":0,"student_logits":[2.0,0.5],"teacher_logits":[0.1,0.9],"student_cost":1.0,"teacher_cost":3.0}}"#).unwrap();
        writeln!(f, r#"{{"id":"b","label":1,"student_logits":[0.0,1.5],"teacher_pred":1,"student_cost":2.0}}"#).unwrap();
        f
    }

    #[test]
    fn replay_student_and_teacher_sides() {
        let f = dataset();
        let student =
            ReplayBackend::open(f.path(), Side::Student, Task::Classification, None).unwrap();
        let out = student.lookup(&InferenceRequest::by_id("a")).unwrap();
        assert_eq!(out.logits.unwrap().as_slice(), &[2.0, 0.5]);
        assert_eq!(out.prediction, Value::from(0));
        assert_eq!((out.measured_latency_ms, out.cost), (0.0, 1.0));
        assert_eq!(
            student.lookup(&InferenceRequest::by_id("a")).unwrap(),
            student.lookup(&InferenceRequest::by_id("a")).unwrap()
        );

        let teacher =
            ReplayBackend::open(f.path(), Side::Teacher, Task::Classification, Some(9.0)).unwrap();
        let out = teacher.lookup(&InferenceRequest::by_id("a")).unwrap();
        assert_eq!(out.prediction, Value::from(1));
        assert_eq!(out.cost, 9.0);
        let out = teacher.lookup(&InferenceRequest::by_id("b")).unwrap();
        assert!(out.logits.is_none());
        assert_eq!(out.prediction, Value::from(1));
        assert_eq!(Backend::Replay(student).declared_cost(), 1.5);
    }

    #[test]
    fn replay_errors() {
        let f = dataset();
        let student =
            ReplayBackend::open(f.path(), Side::Student, Task::Classification, None).unwrap();
        assert_eq!(
            student.lookup(&InferenceRequest::by_id("zz")),
            Err(BackendError::NotFound("zz".into()))
        );
        assert!(matches!(
            student.lookup(&InferenceRequest::default()),
            Err(BackendError::Invalid(_))
        ));
        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, r#"{{"id":"a","student_logits":[1.0]}}"#).unwrap();
        assert!(matches!(
            ReplayBackend::open(g.path(), Side::Teacher, Task::Classification, None),
            Err(BackendError::Load(_))
        ));
        assert!(matches!(
            ReplayBackend::open(
                Path::new("/nonexistent/file.jsonl"),
                Side::Student,
                Task::Classification,
                None
            ),
            Err(BackendError::Load(_))
        ));
    }

    #[test]
    fn decode_responses() {
        let out = decode_model_output(br#"{"task":"classification","logits":[0.0,3.0]}"#).unwrap();
        assert_eq!(out.prediction, Value::from(1));
        let out = decode_model_output(br#"{"task":"classification","prediction":7}"#).unwrap();
        assert!(out.logits.is_none());
        let det = br#"{"task":"detection","detection":{"boxes":[{"class_logits":[0,2],"reg_samples":[[{"s":0,"q":1}],[{"s":0,"q":1}],[{"s":0,"q":1}],[{"s":0,"q":1}]]}]}}"#;
        assert_eq!(
            decode_model_output(det).unwrap().prediction,
            serde_json::json!([1])
        );
        for bad in [
            &br#"{"task":"classification"}"#[..],
            br#"{"task":"detection","logits":[1.0]}"#,
            br#"{"task":"classification","logits":[]}"#,
            br#"{"task":"segmentation","logits":[1.0]}"#,
            br#"{"task":"detection","detection":{"boxes":[]}}"#,
            b"garbage",
        ] {
            assert!(matches!(
                decode_model_output(bad),
                Err(BackendError::Malformed(_))
            ));
        }
    }

    #[test]
    fn descriptor_validation_and_serde() {
        let d: BackendDescriptor =
            serde_json::from_str(r#"{"kind":"remote","url":"http://127.0.0.1:9/infer"}"#).unwrap();
        assert!(d.validate().is_ok());
        let zero = BackendDescriptor::Remote {
            url: "http://x".into(),
            timeout_ms: 0,
            cost: None,
            max_in_flight: 1,
        };
        assert!(zero.validate().is_err());
        let neg = BackendDescriptor::Replay {
            dataset: "x".into(),
            side: Side::Student,
            cost: Some(-1.0),
        };
        assert!(neg.validate().is_err());
        assert!(BackendDescriptor::remote("not a url").validate().is_err());
        let text =
            serde_json::to_string(&BackendDescriptor::replay("d.jsonl", Side::Teacher)).unwrap();
        assert_eq!(
            text,
            r#"{"kind":"replay","dataset":"d.jsonl","side":"teacher"}"#
        );
    }
}
