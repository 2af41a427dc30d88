//! `/live`: one JSON packet per WebSocket text message. The first packet is
//! always a full scene; a subscriber that falls behind gets a fresh full
//! scene instead of the packets it missed.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use futures::{SinkExt, StreamExt};
use tokio::sync::broadcast::error::RecvError;
use tracing::debug;

use crate::state::AppState;

pub async fn live(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| subscriber(socket, state))
}

async fn subscriber(socket: WebSocket, state: Arc<AppState>) {
    let (mut sink, mut incoming) = socket.split();
    // Subscribe before snapshotting so no tick falls between the two.
    let mut rx = state.tx.subscribe();
    let mut last_seq = 0;
    if let Some(full) = state.full_packet() {
        last_seq = full.seq;
        if sink.send(Message::Text(full.json.clone().into())).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            packet = rx.recv() => {
                let packet = match packet {
                    Ok(p) if p.seq <= last_seq => continue,
                    Ok(p) => p,
                    Err(RecvError::Lagged(n)) => {
                        debug!(skipped = n, "subscriber lagged, resyncing");
                        match state.full_packet() {
                            Some(full) if full.seq > last_seq => full,
                            _ => continue,
                        }
                    }
                    Err(RecvError::Closed) => break,
                };
                last_seq = packet.seq;
                if sink.send(Message::Text(packet.json.clone().into())).await.is_err() {
                    break;
                }
            }
            msg = incoming.next() => match msg {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    let _ = sink.close().await;
}
