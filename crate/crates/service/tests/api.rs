mod common;

use std::time::Duration;

use common::*;
use serde_json::Value;
use twin_core::history::{focus, FocusQuery};
use twin_core::ingest::{serialize_snapshot, Simulator, SimulatorConfig, SnapshotSchema};
use twin_service::{Service, ServiceError, SourceConfig};

async fn get(svc: &Service, path: &str) -> (u16, String) {
    let r = reqwest::get(url(svc, path)).await.unwrap();
    (r.status().as_u16(), r.text().await.unwrap())
}

#[tokio::test]
async fn node_queries() {
    // Slow ticks keep the first frame live for the whole test.
    let svc = start(sim_config(0.01)).await;
    let (status, body) = get(&svc, "/nodes").await;
    assert_eq!(status, 200);
    let nodes: Vec<Value> = serde_json::from_str(&body).unwrap();
    assert_eq!(nodes.len(), 8);

    let (status, body) = get(&svc, "/nodes/gpu-0003").await;
    assert_eq!(status, 200);
    let node: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(node["node_name"], "gpu-0003");
    assert_eq!(node["gpus"].as_array().unwrap().len(), 2);

    let (status, body) = get(&svc, "/nodes/nope").await;
    assert_eq!(status, 404);
    assert!(body.contains("nope"));
    svc.shutdown().await.unwrap();
}

#[tokio::test]
async fn frame_ranges() {
    let svc = start(sim_config(0.01)).await;
    let ts = svc.state().live().timestamp;
    let (status, body) = get(&svc, &format!("/frames?from={ts}&to={ts}")).await;
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_str::<Vec<Value>>(&body).unwrap().len(), 1);

    let (status, _) = get(&svc, &format!("/frames?from={}&to={}", ts + 10, ts)).await;
    assert_eq!(status, 400);
    let (status, _) = get(&svc, &format!("/frames/at?t={}", ts - 1)).await;
    assert_eq!(status, 404);
    let (status, _) = get(&svc, &format!("/frames/at?t={}", ts + 5000)).await;
    assert_eq!(status, 200);
    svc.shutdown().await.unwrap();
}

#[tokio::test]
async fn focus_matches_library_query() {
    let svc = start(sim_config(0.01)).await;
    let frame = svc.state().live().frame;
    let user = frame.nodes.values().find_map(|n| n.user.clone());
    let mut queries = vec!["node=gpu-000*".to_string(), "alert=*".to_string()];
    if let Some(u) = user {
        queries.push(format!("user={u}"));
    }
    let client = reqwest::Client::new();
    for q in queries {
        let body: Value = client
            .post(url(&svc, "/focus"))
            .json(&serde_json::json!({ "query": q }))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        let expected = focus(&frame, &FocusQuery::parse(&q).unwrap());
        assert_eq!(body["nodes"], serde_json::json!(expected), "{q}");
    }
    let r = client
        .post(url(&svc, "/focus"))
        .json(&serde_json::json!({ "query": "colour=red" }))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 400);
    svc.shutdown().await.unwrap();
}

#[tokio::test]
async fn stats_and_alerts() {
    let svc = start(sim_config(0.01)).await;
    let (status, table) = get(&svc, "/stats").await;
    assert_eq!(status, 200);
    assert!(table.starts_with("Batch and Triangle Counts per Frame"));
    let (status, lines) = get(&svc, "/stats?format=jsonl").await;
    assert_eq!(status, 200);
    assert!(lines.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
    assert_eq!(get(&svc, "/stats?format=xml").await.0, 400);
    let (status, alerts) = get(&svc, "/alerts").await;
    assert_eq!(status, 200);
    assert!(serde_json::from_str::<Value>(&alerts).unwrap()["alerts"].is_array());
    svc.shutdown().await.unwrap();
}

#[tokio::test]
async fn missing_watch_dir_fails_at_startup() {
    let mut cfg = sim_config(1.0);
    cfg.source = SourceConfig::Watch {
        dir: "/definitely/not/here".into(),
        schema: None,
        infer_delimiter: true,
    };
    match Service::start(cfg).await {
        Err(ServiceError::Source(msg)) => assert!(msg.contains("/definitely/not/here")),
        Err(other) => panic!("wrong error {other}"),
        Ok(_) => panic!("service started without its source"),
    }
}

#[tokio::test]
async fn watch_dir_source_commits_newest_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut sim = Simulator::new(SimulatorConfig { node_count: 3, ..Default::default() });
    let schema = SnapshotSchema::standard(2, '\t');
    let frames: Vec<_> = (0..3).map(|_| sim.next_frame()).collect();
    for (i, f) in frames.iter().enumerate() {
        std::fs::write(dir.path().join(format!("snap-{i}.tsv")), serialize_snapshot(f, &schema)).unwrap();
    }
    let mut cfg = sim_config(50.0);
    cfg.source = SourceConfig::Watch {
        dir: dir.path().to_path_buf(),
        schema: None,
        infer_delimiter: true,
    };
    let svc = start(cfg).await;
    assert_eq!(svc.state().live().timestamp, frames[2].timestamp);
    assert_eq!(svc.state().history.read().unwrap().len(), 3);

    let next = sim.next_frame();
    std::fs::write(dir.path().join("snap-3.tsv"), serialize_snapshot(&next, &schema)).unwrap();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    while svc.state().live().timestamp != next.timestamp {
        assert!(tokio::time::Instant::now() < deadline, "new file not picked up");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let (_, health) = get(&svc, "/health").await;
    assert_eq!(serde_json::from_str::<Value>(&health).unwrap()["history_frames"], 4);
    svc.shutdown().await.unwrap();
}
