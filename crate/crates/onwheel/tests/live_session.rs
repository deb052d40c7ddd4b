//! Websocket sessions against a real server on an ephemeral port.

use std::path::Path;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use onwheel::manifest::Manifest;
use onwheel::protocol::{decode_outbound, encode_inbound, Inbound, Outbound};
use onwheel::serve::{bind, serve, ServeConfig};
use onwheel::session::SessionConfig;
use onwheel::study::replay_session_dir;
use onwheel_core::menu::{apply_gesture, Device, FeedbackEvent, MenuFocus, MenuLayout, SystemState};
use onwheel_core::recognizer::Gesture;
use onwheel_core::scenario::builtin_scenario;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

const FRAME_MS: f64 = 1000.0 / 60.0;

async fn start(out_dir: Option<&Path>, heartbeat_ms: f64) -> String {
    let mut session = SessionConfig::new(builtin_scenario(1).unwrap());
    session.heartbeat_ms = heartbeat_ms;
    let cfg = ServeConfig { session, out_dir: out_dir.map(Path::to_path_buf), tick: Duration::from_millis(20) };
    let (listener, addr) = bind(0).await.unwrap();
    tokio::spawn(serve(listener, cfg));
    format!("ws://{addr}/ws")
}

async fn recv(ws: &mut Ws) -> Option<Outbound> {
    loop {
        match tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("server went quiet")? {
            Ok(Message::Text(t)) => return Some(decode_outbound(&t).unwrap()),
            Ok(Message::Close(_)) | Err(_) => return None,
            Ok(_) => continue,
        }
    }
}

async fn send_keys(ws: &mut Ws, t: &mut f64, pressed: &[&str]) {
    *t += FRAME_MS;
    let msg = Inbound::Keys { pressed: pressed.iter().map(|k| k.to_string()).collect(), t_ms: *t, drive: None };
    ws.send(Message::text(encode_inbound(&msg))).await.unwrap();
}

async fn gesture(ws: &mut Ws, t: &mut f64, pressed: &[&str]) {
    for _ in 0..14 {
        send_keys(ws, t, pressed).await;
    }
    for _ in 0..3 {
        send_keys(ws, t, &[]).await;
    }
}

/// Drains messages until a `state` with `seq` arrives.
async fn state_seq(ws: &mut Ws, seq: u64, seen: &mut Vec<Outbound>) {
    loop {
        let m = recv(ws).await.expect("session closed early");
        let done = matches!(m, Outbound::State { seq: s, .. } if s == seq);
        seen.push(m);
        if done {
            return;
        }
    }
}

#[tokio::test]
async fn scripted_radio_volume_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let url = start(Some(dir.path()), 60_000.0).await;
    let (mut ws, _) = connect_async(&url).await.unwrap();

    let Some(Outbound::Hello { layout, key_map, dwell_frames, .. }) = recv(&mut ws).await else {
        panic!("first message must be hello");
    };
    assert_eq!(dwell_frames, 12);
    assert_eq!(layout, MenuLayout::default().to_document());
    assert_eq!(key_map.right[0], "KeyJ");

    let mut seen = Vec::new();
    state_seq(&mut ws, 1, &mut seen).await;
    let mut t = 0.0;
    // radio on, volume up twice, menu off
    let script: [&[&str]; 4] =
        [&["KeyJ"], &["KeyJ", "KeyK"], &["KeyJ", "KeyK"], &["KeyJ", "KeyK", "KeyL", "Semicolon"]];
    for (i, keys) in script.iter().enumerate() {
        gesture(&mut ws, &mut t, keys).await;
        state_seq(&mut ws, 2 + i as u64, &mut seen).await;
    }

    let trace: Vec<(MenuFocus, _, Vec<FeedbackEvent>, Option<Gesture>)> = seen
        .iter()
        .filter_map(|m| match m {
            Outbound::State { menu_focus, devices, feedback, last_event, heartbeat: false, seq, .. } if *seq > 1 => {
                Some((*menu_focus, *devices, feedback.clone(), *last_event))
            }
            _ => None,
        })
        .collect();
    let layout = MenuLayout::default();
    let mut core = SystemState::default();
    let gestures = [Gesture::right(1), Gesture::right(2), Gesture::right(2), Gesture::right(4)];
    assert_eq!(trace.len(), gestures.len());
    for (g, (focus, devices, feedback, event)) in gestures.iter().zip(&trace) {
        let (next, fb) = apply_gesture(&core, *g, &layout);
        core = next;
        assert_eq!((*focus, *devices, feedback.clone(), *event), (core.menu, core.devices, fb, Some(*g)));
    }
    let start_volume = SystemState::default().devices.volume(Device::Radio).unwrap();
    let (focus, devices, _, _) = &trace[3];
    assert_eq!(*focus, MenuFocus::Top);
    assert!(devices.power(Device::Radio));
    assert_eq!(devices.volume(Device::Radio), Some(start_volume + 2));

    ws.send(Message::text(encode_inbound(&Inbound::End))).await.unwrap();
    let mut summary = None;
    while let Some(m) = recv(&mut ws).await {
        if let Outbound::Summary { rows } = m {
            summary = Some(rows);
            break;
        }
    }
    assert!(summary.is_some());
    drop(ws);

    // the recording replays to the same outbound sequence
    let session_dir = dir.path().join("session-0001");
    for _ in 0..100 {
        if std::fs::read_to_string(session_dir.join("session.log")).is_ok_and(|s| s.contains("\nX ")) {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let Manifest::Session(m) = Manifest::read(&session_dir).unwrap() else { panic!("session manifest expected") };
    let log = std::fs::read_to_string(session_dir.join("session.log")).unwrap();
    assert!(log.contains("\nX "), "disconnect was not recorded");
    let replay = replay_session_dir(&session_dir, &m).unwrap();
    assert_eq!(replay.first_mismatch, None);
    assert!(replay.outbound.len() >= 7);

    let cli = |cmd: &str| {
        std::process::Command::new(env!("CARGO_BIN_EXE_onwheel")).arg(cmd).arg(&session_dir).output().unwrap()
    };
    let out = cli("replay");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("replay matches the recording"));
    assert!(cli("report").status.success());

    // an edited outbound line no longer matches what the inputs produce
    let tampered = log.replacen("\"menu_focus\":\"radio\"", "\"menu_focus\":\"mp3\"", 1);
    assert_ne!(tampered, log);
    std::fs::write(session_dir.join("session.log"), tampered).unwrap();
    let out = cli("replay");
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverges"));
}

#[tokio::test]
async fn wrong_version_is_refused() {
    let url = start(None, 60_000.0).await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    assert!(matches!(recv(&mut ws).await, Some(Outbound::Hello { .. })));
    ws.send(Message::text(r#"{"version":2,"type":"end"}"#)).await.unwrap();
    let mut fatal = false;
    while let Some(m) = recv(&mut ws).await {
        if let Outbound::Error { fatal: true, message } = m {
            assert!(message.contains("version"), "{message}");
            fatal = true;
        }
    }
    assert!(fatal, "a fatal error must precede the close");
}

#[tokio::test]
async fn malformed_frames_keep_the_session() {
    let url = start(None, 60_000.0).await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    recv(&mut ws).await;
    ws.send(Message::text(r#"{"version":1,"type":"keys","pressed":"KeyJ"}"#)).await.unwrap();
    loop {
        match recv(&mut ws).await.expect("still open") {
            Outbound::Error { fatal, .. } => {
                assert!(!fatal);
                break;
            }
            _ => continue,
        }
    }
    let mut t = 0.0;
    gesture(&mut ws, &mut t, &["KeyJ"]).await;
    let mut seen = Vec::new();
    state_seq(&mut ws, 2, &mut seen).await;
    assert!(matches!(seen.last(), Some(Outbound::State { menu_focus: MenuFocus::Radio, .. })));
}

#[tokio::test]
async fn quiet_sessions_get_heartbeats() {
    let url = start(None, 100.0).await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    let mut beats = 0;
    while beats < 3 {
        if let Some(Outbound::State { heartbeat: true, .. }) = recv(&mut ws).await {
            beats += 1;
        }
    }
}
