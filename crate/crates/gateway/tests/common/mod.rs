#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::routing::post;
use axum::{Json, Router};
use cascadeflow_core::dataset::{save_classification_dataset, CalibrationRecord};
use cascadeflow_core::{LogitVector, RouterPolicy};
use cascadeflow_gateway::{BackendDescriptor, Gateway, GatewayConfig, GatewayOptions, Side, Task};
use serde_json::{json, Value};
use tokio::net::TcpListener;

/// Record `i` has Student logits `[s, 0, 0]` with `s` spread over [-2, 8) so
/// the energy score covers both sides of typical thresholds. The Teacher
/// always answers class 2, the Student class 0 whenever `s > 0`.
pub fn records(n: usize) -> Vec<CalibrationRecord> {
    (0..n)
        .map(|i| {
            let s = -2.0 + 10.0 * ((i * 37) % n) as f64 / n as f64;
            let mut r = CalibrationRecord::new(
                format!("r{i:03}"),
                LogitVector::new(vec![s, 0.0, 0.0]).unwrap(),
            );
            r.label = Some(2);
            r.teacher_pred = Some(2);
            r.student_cost = Some(1.0);
            r.teacher_cost = Some(4.0);
            r
        })
        .collect()
}

pub fn write_dataset(dir: &Path, records: &[CalibrationRecord]) -> std::path::PathBuf {
    let path = dir.join("calib.jsonl");
    save_classification_dataset(&path, records).unwrap();
    path
}

pub fn replay_config(path: &Path, policy: RouterPolicy) -> GatewayConfig {
    GatewayConfig {
        policy,
        student: BackendDescriptor::replay(path, Side::Student),
        teacher: BackendDescriptor::replay(path, Side::Teacher),
        task: Task::Classification,
        degraded_mode: Default::default(),
    }
}

pub fn gateway(config: GatewayConfig) -> Arc<Gateway> {
    Arc::new(Gateway::new(config, GatewayOptions::default()).unwrap())
}

pub fn score(record: &CalibrationRecord) -> f64 {
    RouterPolicy::energy(0.0)
        .score(&record.student_logits)
        .unwrap()
}

/// A model server answering every request with `logits` after `delay`.
pub async fn stub_model(logits: Vec<f64>, delay: Duration) -> String {
    stub(move |_req: Value| {
        let logits = logits.clone();
        async move {
            tokio::time::sleep(delay).await;
            json!({ "task": "classification", "logits": logits })
        }
    })
    .await
}

pub async fn stub<F, Fut>(handler: F) -> String
where
    F: Fn(Value) -> Fut + Clone + Send + Sync + 'static,
    Fut: std::future::Future<Output = Value> + Send + 'static,
{
    let app = Router::new().route(
        "/infer",
        post(move |Json(req): Json<Value>| {
            let handler = handler.clone();
            async move { Json(handler(req).await) }
        }),
    );
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/infer")
}

/// Serves `gateway` on an ephemeral port; returns its base URL.
pub async fn serve(
    gateway: Arc<Gateway>,
) -> (
    String,
    tokio::sync::oneshot::Sender<()>,
    tokio::task::JoinHandle<()>,
) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let handle = tokio::spawn(async move {
        cascadeflow_gateway::http::serve(listener, gateway, async {
            let _ = rx.await;
        })
        .await
        .unwrap()
    });
    (format!("http://{addr}"), tx, handle)
}
