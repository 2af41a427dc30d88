mod common;

use std::collections::BTreeMap;

use common::*;
use twin_core::pipeline::SceneChange;
use twin_core::scene::{apply_updates, Scene};
use twin_service::FramePacket;

fn fold(scene: &mut Option<Scene>, packet: &FramePacket) {
    match &packet.change {
        SceneChange::Full { scene: s, .. } => *scene = Some((**s).clone()),
        SceneChange::Delta { updates } => {
            apply_updates(scene.as_mut().expect("full packet first"), updates).expect("delta applies")
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn first_packet_is_full_and_deltas_reproduce_history() {
    let svc = start(sim_config(40.0)).await;
    let mut ws = subscribe(&svc).await;
    let first = next_packet(&mut ws).await;
    assert!(first.is_full());

    let mut scene = None;
    fold(&mut scene, &first);
    let mut last_seq = first.seq;
    let mut deltas = 0;
    let client = reqwest::Client::new();
    while deltas < 5 {
        let p = next_packet(&mut ws).await;
        assert!(p.seq > last_seq, "sequence numbers increase");
        last_seq = p.seq;
        if !p.is_full() {
            deltas += 1;
        }
        fold(&mut scene, &p);
        let rebuilt: FramePacket = client
            .get(url(&svc, &format!("/scene?at={}", p.timestamp)))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        match rebuilt.change {
            SceneChange::Full { scene: s, .. } => assert_eq!(scene.as_ref().unwrap(), &*s),
            other => panic!("expected full scene, got {other:?}"),
        }
    }
    svc.shutdown().await.unwrap();
}

/// Folds packets up to `until`, recording the scene after every seq.
async fn record(ws: &mut Socket, until: u64) -> (BTreeMap<u64, FramePacket>, BTreeMap<u64, Scene>) {
    let (mut packets, mut scenes) = (BTreeMap::new(), BTreeMap::new());
    let mut scene = None;
    loop {
        let p = next_packet(ws).await;
        fold(&mut scene, &p);
        let seq = p.seq;
        scenes.insert(seq, scene.clone().unwrap());
        packets.insert(seq, p);
        if seq >= until {
            return (packets, scenes);
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn subscribers_see_identical_sequences() {
    let svc = start(sim_config(30.0)).await;
    let mut a = subscribe(&svc).await;
    let mut b = subscribe(&svc).await;
    let until = svc.state().live().seq + 8;
    let ((pa, sa), (pb, sb)) = tokio::join!(record(&mut a, until), record(&mut b, until));
    let first_common = (*pa.keys().next().unwrap()).max(*pb.keys().next().unwrap());
    let common: Vec<u64> = pa.keys().copied().filter(|k| *k > first_common && pb.contains_key(k)).collect();
    assert!(common.len() >= 5, "overlap {common:?}");
    for seq in common {
        assert_eq!(pa[&seq], pb[&seq]);
        assert_eq!(sa[&seq], sb[&seq]);
    }
    svc.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn restart_keeps_item_ids_and_resumes_after_history() {
    let dir = tempfile::tempdir().unwrap();
    let config = || {
        let mut c = sim_config(50.0);
        c.history_dir = Some(dir.path().join("history"));
        c
    };

    let svc = start(config()).await;
    let mut ws = subscribe(&svc).await;
    let before = match next_packet(&mut ws).await.change {
        SceneChange::Full { scene, .. } => scene.items.keys().cloned().collect::<Vec<_>>(),
        _ => unreachable!(),
    };
    for _ in 0..3 {
        next_packet(&mut ws).await;
    }
    drop(ws);
    svc.shutdown().await.unwrap();
    let last_ts = {
        let store = twin_core::history::HistoryStore::open(dir.path().join("history"), Default::default()).unwrap();
        store.latest().unwrap().timestamp
    };

    let svc = start(config()).await;
    let mut ws = subscribe(&svc).await;
    let first = next_packet(&mut ws).await;
    assert!(first.timestamp > last_ts, "resumes after persisted history");
    match first.change {
        SceneChange::Full { scene, .. } => assert_eq!(scene.items.keys().cloned().collect::<Vec<_>>(), before),
        _ => panic!("first packet after restart must be full"),
    }
    svc.shutdown().await.unwrap();
}
