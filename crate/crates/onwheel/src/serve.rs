//! Websocket service for live sessions at `/ws`.

use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::time::{interval, Instant, MissedTickBehavior};

use crate::docs::{content_hash, to_pretty_json};
use crate::manifest::{Manifest, SessionManifest, MANIFEST_VERSION, TOOL_VERSION};
use crate::protocol::{encode, Outbound, PROTOCOL_VERSION};
use crate::session::{Session, SessionConfig, SessionRecorder};

pub const SESSION_LOG: &str = "session.log";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const LAYOUT_FILE: &str = "layout.json";
pub const KEY_MAP_FILE: &str = "keys.json";

pub struct ServeConfig {
    pub session: SessionConfig,
    /// Session directories are created here; `None` disables recording.
    pub out_dir: Option<PathBuf>,
    pub tick: Duration,
}

struct AppState {
    cfg: ServeConfig,
    next_id: AtomicU64,
}

pub fn router(cfg: ServeConfig) -> Router {
    let state = Arc::new(AppState { cfg, next_id: AtomicU64::new(1) });
    Router::new().route("/ws", get(upgrade)).with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, cfg: ServeConfig) -> std::io::Result<()> {
    axum::serve(listener, router(cfg)).await
}

pub async fn bind(port: u16) -> std::io::Result<(TcpListener, SocketAddr)> {
    let listener = TcpListener::bind(("127.0.0.1", port)).await?;
    let addr = listener.local_addr()?;
    Ok((listener, addr))
}

async fn upgrade(ws: WebSocketUpgrade, State(app): State<Arc<AppState>>) -> impl IntoResponse {
    let id = app.next_id.fetch_add(1, Ordering::Relaxed);
    ws.on_upgrade(move |socket| async move {
        if let Err(e) = run_session(socket, &app, id).await {
            tracing::warn!(session = id, "session ended with error: {e}");
        }
    })
}

/// Creates the session directory with its manifest and opens the log.
fn open_recording(cfg: &ServeConfig, id: u64) -> std::io::Result<Option<SessionRecorder<fs::File>>> {
    let Some(root) = &cfg.out_dir else {
        return Ok(None);
    };
    let dir = root.join(format!("session-{id:04}"));
    fs::create_dir_all(&dir)?;
    let s = &cfg.session;
    let scenario = s.scenario.to_document();
    let layout = s.layout.to_document();
    fs::write(dir.join(SCENARIO_FILE), to_pretty_json(&scenario))?;
    fs::write(dir.join(LAYOUT_FILE), to_pretty_json(&layout))?;
    fs::write(dir.join(KEY_MAP_FILE), to_pretty_json(&s.key_map))?;
    Manifest::Session(SessionManifest {
        schema_version: MANIFEST_VERSION,
        tool_version: TOOL_VERSION.into(),
        protocol_version: PROTOCOL_VERSION,
        road_id: s.scenario.road().id,
        scenario_file: SCENARIO_FILE.into(),
        scenario_hash: content_hash(&scenario),
        layout_file: LAYOUT_FILE.into(),
        layout_hash: content_hash(&layout),
        key_map_file: KEY_MAP_FILE.into(),
        key_map_hash: content_hash(&s.key_map),
        dwell_frames: s.recognizer.dwell_frames(),
        heartbeat_ms: s.heartbeat_ms,
        log: SESSION_LOG.into(),
    })
    .write(&dir)?;
    let file = fs::File::create(dir.join(SESSION_LOG))?;
    tracing::info!(session = id, dir = %dir.display(), "recording session");
    SessionRecorder::new(file, id, s.scenario.road().id).map(Some)
}

async fn send_all(socket: &mut WebSocket, msgs: &[Outbound]) -> Result<(), axum::Error> {
    for m in msgs {
        socket.send(Message::Text(encode(m).into())).await?;
    }
    Ok(())
}

async fn run_session(mut socket: WebSocket, app: &AppState, id: u64) -> anyhow::Result<()> {
    let cfg = &app.cfg;
    let mut recorder = open_recording(cfg, id)?;
    let mut session = Session::new(id, cfg.session.clone());
    let start = Instant::now();
    let now_ms = || start.elapsed().as_secs_f64() * 1000.0;

    let hello = session.open();
    if let Some(r) = recorder.as_mut() {
        r.outbound(&hello)?;
    }
    send_all(&mut socket, &hello).await?;

    let mut ticks = interval(cfg.tick);
    ticks.set_missed_tick_behavior(MissedTickBehavior::Delay);
    ticks.tick().await;
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Binary(_))) => {
                        send_all(&mut socket, &[Outbound::Error { message: "binary frames are not supported".into(), fatal: false }]).await?;
                        continue;
                    }
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => {
                        let t = now_ms();
                        let out = session.disconnect(t);
                        if let Some(r) = recorder.as_mut() {
                            r.disconnect(t)?;
                            r.outbound(&out)?;
                        }
                        return Ok(());
                    }
                };
                let t = now_ms();
                let out = session.handle(t, &text);
                if let Some(r) = recorder.as_mut() {
                    r.inbound(t, &text)?;
                    r.outbound(&out)?;
                }
                send_all(&mut socket, &out).await?;
                if session.is_closed() {
                    let _ = socket.send(Message::Close(None)).await;
                    return Ok(());
                }
            }
            _ = ticks.tick() => {
                let t = now_ms();
                let out = session.tick(t);
                if let Some(r) = recorder.as_mut() {
                    r.tick(t)?;
                    r.outbound(&out)?;
                }
                send_all(&mut socket, &out).await?;
            }
        }
    }
}
