//! Live twin service: a single committer ticks the frame source through the
//! pipeline, records history and broadcasts packets; axum serves queries and
//! the `/live` stream.

pub mod config;
pub mod error;
pub mod http;
pub mod live;
pub mod packet;
pub mod source;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use tokio::sync::watch;
use tokio::task::JoinHandle;
use tracing::{error, info};
use twin_core::config::SceneConfig;
use twin_core::history::HistoryStore;
use twin_core::ingest::{default_rules, parse_rules};
use twin_core::pipeline::FramePipeline;
use twin_core::TwinError;

pub use config::{ServiceConfig, SourceConfig, BIND_ENV};
pub use error::ServiceError;
pub use packet::FramePacket;
pub use source::{read_snapshot, FrameSource, SourceFrame};
pub use state::{AppState, Committer, LiveState, Published};

/// A running service. Dropping it without `shutdown` leaves the tasks
/// running until the runtime stops.
pub struct Service {
    addr: SocketAddr,
    state: Arc<AppState>,
    stop: watch::Sender<bool>,
    server: JoinHandle<std::io::Result<()>>,
    ticker: JoinHandle<()>,
}

impl Service {
    /// Validates the config, opens the source and history, commits the
    /// first tick and starts serving. Fails without serving anything if
    /// any of these steps fail.
    pub async fn start(config: ServiceConfig) -> Result<Self, ServiceError> {
        let addr = config.validate()?;
        let scene = match &config.scene {
            Some(p) => SceneConfig::load(p)?,
            None => SceneConfig::default(),
        };
        let builder = scene.builder()?;
        let meshes = scene.mesh_library();
        let rules = match &config.rules {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ServiceError::io(p, e))?;
                parse_rules(&text).map_err(TwinError::from)?
            }
            None => default_rules(),
        };
        let history = match &config.history_dir {
            Some(dir) => HistoryStore::open(dir, config.retention)?,
            None => HistoryStore::new(config.retention),
        };
        let mut source = FrameSource::open(&config.source)?;
        if let Some(latest) = history.latest() {
            source.resume_after(latest.timestamp);
        }
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
        let addr = listener.local_addr().map_err(|source| ServiceError::Bind {
            addr: config.bind.clone(),
            source,
        })?;

        let pipeline = FramePipeline::new(builder.clone(), rules.clone(), meshes.clone());
        let state = Arc::new(AppState::new(history, builder, rules, meshes, config.subscriber_buffer));
        let committer = Committer { source, pipeline };
        let (committer, first) = run_tick(committer, state.clone()).await;
        first?;

        let (stop, stop_rx) = watch::channel(false);
        let period = Duration::from_secs_f64(1.0 / config.tick_hz);
        let ticker = tokio::spawn(ticker(committer, state.clone(), period, stop_rx.clone()));
        let app = http::router(state.clone());
        let mut server_stop = stop_rx;
        let server = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async move {
                    let _ = server_stop.wait_for(|s| *s).await;
                })
                .await
        });
        info!(%addr, "serving");
        Ok(Self {
            addr,
            state,
            stop,
            server,
            ticker,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn state(&self) -> &Arc<AppState> {
        &self.state
    }

    /// Stops ticking, closes the listener and waits for open connections.
    pub async fn shutdown(self) -> Result<(), ServiceError> {
        let _ = self.stop.send(true);
        let _ = self.ticker.await;
        match self.server.await {
            Ok(Ok(())) => Ok(()),
            Ok(Err(e)) => Err(ServiceError::io(self.addr.to_string(), e)),
            Err(e) => Err(ServiceError::Source(format!("server task failed: {e}"))),
        }
    }

    /// Serves until the process receives ctrl-c or SIGTERM, then shuts
    /// down gracefully.
    pub async fn wait(self) -> Result<(), ServiceError> {
        shutdown_signal().await;
        info!("shutting down");
        self.shutdown().await
    }
}

#[cfg(unix)]
async fn shutdown_signal() {
    use tokio::signal::unix::{signal, SignalKind};
    match signal(SignalKind::terminate()) {
        Ok(mut term) => {
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = term.recv() => {}
            }
        }
        Err(_) => {
            let _ = tokio::signal::ctrl_c().await;
        }
    }
}

#[cfg(not(unix))]
async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}

async fn run_tick(mut committer: Committer, state: Arc<AppState>) -> (Committer, Result<bool, TwinError>) {
    tokio::task::spawn_blocking(move || {
        let r = committer.tick(&state);
        (committer, r)
    })
    .await
    .expect("committer panicked")
}

async fn ticker(mut committer: Committer, state: Arc<AppState>, period: Duration, mut stop: watch::Receiver<bool>) {
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    interval.tick().await;
    loop {
        tokio::select! {
            _ = interval.tick() => {}
            _ = stop.wait_for(|s| *s) => break,
        }
        let (c, r) = run_tick(committer, state.clone()).await;
        committer = c;
        if let Err(e) = r {
            error!(error = %e, "tick failed; live state unchanged");
        }
    }
}
