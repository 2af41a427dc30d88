#![allow(dead_code)]

use std::time::Duration;

use futures::StreamExt;
use tokio_tungstenite::tungstenite::Message;
use twin_core::ingest::SimulatorConfig;
use twin_service::{FramePacket, Service, ServiceConfig, SourceConfig};

pub fn sim_config(tick_hz: f64) -> ServiceConfig {
    ServiceConfig {
        bind: "127.0.0.1:0".into(),
        tick_hz,
        source: SourceConfig::Simulator(SimulatorConfig {
            node_count: 6,
            cpu_node_count: 2,
            seed: 11,
            ..Default::default()
        }),
        ..Default::default()
    }
}

pub async fn start(config: ServiceConfig) -> Service {
    Service::start(config).await.expect("service starts")
}

pub fn url(svc: &Service, path: &str) -> String {
    format!("http://{}{}", svc.addr(), path)
}

pub type Socket = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

pub async fn subscribe(svc: &Service) -> Socket {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/live", svc.addr()))
        .await
        .expect("websocket connects");
    ws
}

pub async fn next_packet(ws: &mut Socket) -> FramePacket {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("packet within 10s")
            .expect("stream open")
            .expect("websocket message");
        if let Message::Text(text) = msg {
            return serde_json::from_str(&text).expect("packet parses");
        }
    }
}
