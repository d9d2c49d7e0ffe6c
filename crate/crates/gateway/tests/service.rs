mod common;

use std::sync::Arc;

use cascadeflow_core::calibration::expected_cost;
use cascadeflow_core::{LogitVector, RouterPolicy, ScoreType, Target};
use cascadeflow_gateway::config::PolicyUpdate;
use cascadeflow_gateway::{
    BackendDescriptor, ConfigUpdate, DegradedMode, FeedItem, Gateway, GatewayError, GatewayOptions,
    InferRequest, Side,
};
use common::*;
use serde_json::Value;

#[tokio::test]
async fn routes_by_score_and_answers_from_the_chosen_model() {
    let dir = tempfile::tempdir().unwrap();
    let recs = records(50);
    let gw = gateway(replay_config(
        &write_dataset(dir.path(), &recs),
        RouterPolicy::energy(3.0),
    ));
    for r in &recs {
        let resp = gw.handle_infer(InferRequest::by_id(&r.id)).await.unwrap();
        let s = score(r);
        assert_eq!(resp.score, s);
        assert_eq!(resp.threshold, 3.0);
        if s >= 3.0 {
            assert_eq!(resp.route, Target::Student);
            assert_eq!(resp.prediction, Value::from(r.student_prediction()));
            assert!(resp.teacher_latency_ms.is_none());
        } else {
            assert_eq!(resp.route, Target::Teacher);
            assert_eq!(resp.prediction, Value::from(2));
            assert!(resp.teacher_latency_ms.is_some());
        }
        assert_eq!(resp.degraded, None);
    }
}

#[tokio::test]
async fn negative_infinity_threshold_keeps_everything_on_the_student() {
    let dir = tempfile::tempdir().unwrap();
    let recs = records(40);
    let gw = gateway(replay_config(
        &write_dataset(dir.path(), &recs),
        RouterPolicy::energy(f64::NEG_INFINITY),
    ));
    for r in &recs {
        assert_eq!(
            gw.handle_infer(InferRequest::by_id(&r.id))
                .await
                .unwrap()
                .route,
            Target::Student
        );
    }
    let stats = gw.get_stats();
    assert_eq!(stats.total, 40);
    assert_eq!(stats.student_fraction, 1.0);
}

#[tokio::test]
async fn threshold_update_applies_to_the_next_request() {
    let dir = tempfile::tempdir().unwrap();
    let recs = records(5);
    let gw = gateway(replay_config(
        &write_dataset(dir.path(), &recs),
        RouterPolicy::energy(3.0),
    ));
    // a single logit of 4 has energy score exactly 4
    let req = InferRequest {
        id: Some(recs[0].id.clone()),
        input: None,
        logits: Some(LogitVector::new(vec![4.0]).unwrap()),
    };
    assert_eq!(
        gw.handle_infer(req.clone()).await.unwrap().route,
        Target::Student
    );
    gw.update_config(&ConfigUpdate::threshold(5.0)).unwrap();
    let resp = gw.handle_infer(req).await.unwrap();
    assert_eq!(resp.route, Target::Teacher);
    assert_eq!(resp.score, 4.0);
    assert_eq!(resp.threshold, 5.0);
}

#[tokio::test]
async fn invalid_update_is_rejected_and_config_kept() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_dataset(dir.path(), &records(5));
    let gw = gateway(replay_config(&path, RouterPolicy::random(0.3)));
    let before = gw.get_config();
    let bad = ConfigUpdate {
        policy: Some(PolicyUpdate {
            random_rate: Some(1.5),
            ..Default::default()
        }),
        ..Default::default()
    };
    assert!(matches!(
        gw.update_config(&bad),
        Err(GatewayError::Config(_))
    ));
    assert_eq!(gw.get_config(), before);

    let missing = ConfigUpdate {
        teacher: Some(BackendDescriptor::replay(
            dir.path().join("nope.jsonl"),
            Side::Teacher,
        )),
        ..Default::default()
    };
    assert!(matches!(
        gw.update_config(&missing),
        Err(GatewayError::InvalidConfig(_))
    ));
    assert_eq!(gw.get_config(), before);
}

#[test]
fn concurrent_updates_never_tear_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_dataset(dir.path(), &records(5));
    let gw = gateway(replay_config(&path, RouterPolicy::energy(0.0)));
    // each writer pairs a score type with its own threshold; a reader must
    // never observe one writer's score type with another's threshold
    let tag = |st: ScoreType| ScoreType::ALL.iter().position(|&s| s == st).unwrap() as f64;
    std::thread::scope(|scope| {
        for &st in &[ScoreType::Energy, ScoreType::Softmax, ScoreType::Entropy] {
            let gw = &gw;
            scope.spawn(move || {
                for i in 0..300 {
                    let update = ConfigUpdate {
                        policy: Some(PolicyUpdate {
                            score_type: Some(st),
                            threshold: Some(tag(st) * 1000.0 + i as f64),
                            ..Default::default()
                        }),
                        ..Default::default()
                    };
                    gw.update_config(&update).unwrap();
                }
            });
        }
        let gw = &gw;
        scope.spawn(move || {
            for _ in 0..3000 {
                let p = gw.get_config().policy;
                if p.threshold != 0.0 {
                    assert_eq!((p.threshold / 1000.0).floor(), tag(p.score_type));
                }
            }
        });
    });
    let last = gw.get_config().policy;
    assert_eq!(last.threshold, tag(last.score_type) * 1000.0 + 299.0);
}

#[tokio::test]
async fn stats_count_exactly_and_reset_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let recs = records(30);
    let gw = gateway(replay_config(
        &write_dataset(dir.path(), &recs),
        RouterPolicy::energy(3.0),
    ));
    let fresh = gw.get_stats();
    assert_eq!(
        (fresh.total, fresh.student_count, fresh.teacher_count),
        (0, 0, 0)
    );
    assert_eq!(fresh.estimated_cost, 0.0);

    let k = recs.iter().filter(|r| score(r) >= 3.0).count() as u64;
    let m = recs.len() as u64 - k;
    assert!(k > 0 && m > 0);
    for r in &recs {
        gw.handle_infer(InferRequest::by_id(&r.id)).await.unwrap();
        let s = gw.get_stats();
        assert_eq!(s.student_count + s.teacher_count, s.total);
    }
    let s = gw.get_stats();
    assert_eq!((s.student_count, s.teacher_count), (k, m));
    assert_eq!(s.student_fraction, k as f64 / 30.0);
    // replay descriptors declare no cost; the per-record means are 1 and 4
    assert_eq!(s.estimated_cost, expected_cost(k, m, 1.0, 4.0).unwrap());
    assert_eq!(s.score_histogram.total(), 30);
    assert!(s.mean_total_latency_ms >= s.mean_student_latency_ms);

    let reset = gw.reset_stats();
    assert_eq!(
        (reset.total, reset.student_count, reset.teacher_count),
        (0, 0, 0)
    );
    assert_eq!(reset.score_histogram.total(), 0);
}

#[tokio::test]
async fn raising_the_threshold_never_adds_student_routes() {
    let dir = tempfile::tempdir().unwrap();
    let recs = records(60);
    let path = write_dataset(dir.path(), &recs);
    let mut previous = u64::MAX;
    for t in [-1.0, 0.5, 2.0, 3.5, 5.0, 9.0] {
        let gw = gateway(replay_config(&path, RouterPolicy::energy(t)));
        for r in &recs {
            gw.handle_infer(InferRequest::by_id(&r.id)).await.unwrap();
        }
        let n_s = gw.get_stats().student_count;
        assert!(n_s <= previous, "t={t}: {n_s} > {previous}");
        previous = n_s;
    }
}

#[tokio::test]
async fn teacher_failure_follows_degraded_mode() {
    let dir = tempfile::tempdir().unwrap();
    let recs = records(10);
    let student_path = write_dataset(dir.path(), &recs);
    // teacher replay only knows the first record
    let teacher_dir = tempfile::tempdir().unwrap();
    let teacher_path = write_dataset(teacher_dir.path(), &recs[..1]);
    let mut config = replay_config(&student_path, RouterPolicy::energy(f64::INFINITY));
    config.teacher = BackendDescriptor::replay(&teacher_path, Side::Teacher);

    let gw = gateway(config.clone());
    assert!(matches!(
        gw.handle_infer(InferRequest::by_id(&recs[3].id)).await,
        Err(GatewayError::Teacher(_))
    ));
    assert_eq!(gw.get_stats().total, 0);

    config.degraded_mode = DegradedMode::StudentOnly;
    let gw = gateway(config);
    let resp = gw
        .handle_infer(InferRequest::by_id(&recs[3].id))
        .await
        .unwrap();
    assert_eq!(resp.route, Target::Teacher);
    assert_eq!(resp.degraded, Some(true));
    assert_eq!(resp.prediction, Value::from(recs[3].student_prediction()));
    let ok = gw
        .handle_infer(InferRequest::by_id(&recs[0].id))
        .await
        .unwrap();
    assert_eq!(ok.degraded, None);
    let stats = gw.get_stats();
    assert_eq!((stats.teacher_count, stats.degraded_count), (2, 1));
}

#[tokio::test]
async fn student_failure_fails_the_request() {
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(replay_config(
        &write_dataset(dir.path(), &records(3)),
        RouterPolicy::energy(0.0),
    ));
    assert!(matches!(
        gw.handle_infer(InferRequest::by_id("unknown")).await,
        Err(GatewayError::Student(_))
    ));
    assert!(matches!(
        gw.handle_infer(InferRequest::default()).await,
        Err(GatewayError::Student(_))
    ));
}

#[tokio::test]
async fn random_policy_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let recs = records(40);
    let path = write_dataset(dir.path(), &recs);
    let run = || async {
        let gw = Gateway::new(
            replay_config(&path, RouterPolicy::random(0.5)),
            GatewayOptions {
                seed: 11,
                ..Default::default()
            },
        )
        .unwrap();
        let mut routes = Vec::new();
        for r in &recs {
            routes.push(
                gw.handle_infer(InferRequest::by_id(&r.id))
                    .await
                    .unwrap()
                    .route,
            );
        }
        routes
    };
    let a = run().await;
    assert_eq!(a, run().await);
    assert!(a.contains(&Target::Student) && a.contains(&Target::Teacher));
}

#[tokio::test]
async fn every_request_emits_one_ordered_event() {
    let dir = tempfile::tempdir().unwrap();
    let recs = records(100);
    let gw = gateway(replay_config(
        &write_dataset(dir.path(), &recs),
        RouterPolicy::energy(3.0),
    ));
    let mut feed = gw.subscribe();
    let mut routes = Vec::new();
    for r in &recs {
        routes.push(
            gw.handle_infer(InferRequest::by_id(&r.id))
                .await
                .unwrap()
                .route,
        );
    }
    for (i, r) in recs.iter().enumerate() {
        match feed.next().await.unwrap() {
            FeedItem::Event(e) => {
                assert_eq!(e.seq, i as u64 + 1);
                assert_eq!(e.id.as_deref(), Some(r.id.as_str()));
                assert_eq!(e.route, routes[i]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[tokio::test]
async fn slow_subscriber_gets_a_drop_notice() {
    let dir = tempfile::tempdir().unwrap();
    let recs = records(100);
    let gw = Arc::new(
        Gateway::new(
            replay_config(&write_dataset(dir.path(), &recs), RouterPolicy::energy(3.0)),
            GatewayOptions {
                event_buffer: 8,
                ..Default::default()
            },
        )
        .unwrap(),
    );
    let mut feed = gw.subscribe();
    for r in &recs {
        gw.handle_infer(InferRequest::by_id(&r.id)).await.unwrap();
    }
    assert_eq!(
        feed.next().await,
        Some(FeedItem::Disconnected { dropped: 92 })
    );
    assert_eq!(feed.next().await, None);
}

#[tokio::test]
async fn detection_requests_route_on_total_energy() {
    use cascadeflow_core::dataset::{write_detection, DetectionRecord};
    use cascadeflow_core::energy::{
        detection_total_energy, DetectionBox, DetectionSample, RegressionScoreSample,
    };
    use cascadeflow_gateway::Task;

    let sample = |lead: f64| {
        let reg = || vec![RegressionScoreSample::new(lead, 1.0).unwrap()];
        DetectionSample::new(vec![DetectionBox {
            class_logits: LogitVector::new(vec![lead, 0.0]).unwrap(),
            reg_samples: [reg(), reg(), reg(), reg()],
        }])
        .unwrap()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("det.jsonl");
    let recs: Vec<DetectionRecord> = [("low", -3.0), ("high", 6.0)]
        .into_iter()
        .map(|(id, lead)| DetectionRecord {
            id: id.into(),
            sample: sample(lead),
            reference: None,
        })
        .collect();
    write_detection(&recs, std::fs::File::create(&path).unwrap()).unwrap();

    let mut config = replay_config(&path, RouterPolicy::energy(4.0));
    config.task = Task::Detection;
    let gw = gateway(config.clone());
    for r in &recs {
        let resp = gw.handle_infer(InferRequest::by_id(&r.id)).await.unwrap();
        let s = -detection_total_energy(&r.sample).value();
        assert_eq!(resp.score, s);
        assert_eq!(resp.route == Target::Student, s >= 4.0);
        assert_eq!(
            resp.prediction,
            serde_json::json!([r.sample.boxes()[0].class_logits.argmax()])
        );
    }

    config.policy = RouterPolicy::threshold(ScoreType::Softmax, 0.5);
    assert!(Gateway::new(config, GatewayOptions::default()).is_err());
    let direct = InferRequest {
        logits: Some(LogitVector::new(vec![1.0]).unwrap()),
        ..Default::default()
    };
    assert!(matches!(
        gw.handle_infer(direct).await,
        Err(GatewayError::BadRequest(_))
    ));
}
