//! Live-session message protocol.
//!
//! Every message is one JSON object per websocket text frame and carries a
//! `version` field. Inbound frames with a different version end the session.

use onwheel_core::gesture_input::KeyMap;
use onwheel_core::menu::{DeviceState, FeedbackEvent, LayoutDocument, MenuFocus};
use onwheel_core::metrics::Unit;
use onwheel_core::recognizer::Gesture;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;

/// Driving-strip reading sent along with an input frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveInput {
    pub speed_kmh: f64,
    pub lateral_offset_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Inbound {
    /// Raw bend values, 0..=63 per finger, thumb first.
    Fingers {
        left: [u8; 5],
        right: [u8; 5],
        t_ms: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drive: Option<DriveInput>,
    },
    /// Keys held during this frame, as `KeyboardEvent.code` names.
    Keys {
        pressed: Vec<String>,
        t_ms: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drive: Option<DriveInput>,
    },
    /// Finish the session and request the summary.
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadInfo {
    pub road_id: u32,
    pub name: String,
    pub length_m: f64,
    pub ref_speed_kmh: f64,
    pub lane_width_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<u16>,
    pub value: f64,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Outbound {
    /// First message of every session: what the UI must render.
    Hello {
        session: u64,
        road: RoadInfo,
        layout: LayoutDocument,
        key_map: KeyMap,
        dwell_frames: u32,
        heartbeat_ms: f64,
    },
    State {
        seq: u64,
        t_ms: f64,
        menu_focus: MenuFocus,
        devices: DeviceState,
        last_event: Option<Gesture>,
        feedback: Vec<FeedbackEvent>,
        active_task: Option<u16>,
        position_m: f64,
        heartbeat: bool,
    },
    Task {
        task_id: u16,
        prompt: String,
        t_ms: f64,
    },
    Summary {
        rows: Vec<SummaryRow>,
    },
    Error {
        message: String,
        /// The session is closed after a fatal error.
        fatal: bool,
    },
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    version: u32,
    #[serde(flatten)]
    body: &'a T,
}

pub fn encode(msg: &Outbound) -> String {
    serde_json::to_string(&Envelope { version: PROTOCOL_VERSION, body: msg }).expect("messages serialize")
}

pub fn encode_inbound(msg: &Inbound) -> String {
    serde_json::to_string(&Envelope { version: PROTOCOL_VERSION, body: msg }).expect("messages serialize")
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeError {
    /// Wrong or missing protocol version; the session must be refused.
    Version(String),
    Malformed(String),
}

fn split_version(text: &str) -> Result<serde_json::Map<String, Value>, DecodeError> {
    let value: Value = serde_json::from_str(text).map_err(|e| DecodeError::Malformed(format!("invalid JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err(DecodeError::Malformed("message must be a JSON object".into()));
    };
    match obj.remove("version") {
        Some(Value::Number(n)) if n.as_u64() == Some(PROTOCOL_VERSION as u64) => Ok(obj),
        Some(other) => Err(DecodeError::Version(format!(
            "protocol version {other} is not supported; this server speaks version {PROTOCOL_VERSION}"
        ))),
        None => {
            Err(DecodeError::Version(format!("message lacks `version`; this server speaks version {PROTOCOL_VERSION}")))
        }
    }
}

pub fn decode(text: &str) -> Result<Inbound, DecodeError> {
    let obj = split_version(text)?;
    serde_json::from_value(Value::Object(obj)).map_err(|e| DecodeError::Malformed(e.to_string()))
}

/// Client-side decoding of server messages.
pub fn decode_outbound(text: &str) -> Result<Outbound, DecodeError> {
    let obj = split_version(text)?;
    serde_json::from_value(Value::Object(obj)).map_err(|e| DecodeError::Malformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inbound_shapes() {
        let keys = decode(r#"{"version":1,"type":"keys","pressed":["KeyJ","KeyK"],"t_ms":16.5}"#).unwrap();
        assert_eq!(keys, Inbound::Keys { pressed: vec!["KeyJ".into(), "KeyK".into()], t_ms: 16.5, drive: None });
        let fingers = decode(
            r#"{"version":1,"type":"fingers","left":[0,0,0,0,0],"right":[60,60,0,0,0],"t_ms":0,"drive":{"speed_kmh":80,"lateral_offset_m":0.1}}"#,
        )
        .unwrap();
        assert!(matches!(fingers, Inbound::Fingers { drive: Some(_), .. }));
        assert_eq!(decode(r#"{"version":1,"type":"end"}"#).unwrap(), Inbound::End);
        let round = encode_inbound(&keys);
        assert_eq!(decode(&round).unwrap(), keys);
    }

    #[test]
    fn version_is_enforced() {
        assert!(matches!(decode(r#"{"version":2,"type":"end"}"#), Err(DecodeError::Version(_))));
        assert!(matches!(decode(r#"{"type":"end"}"#), Err(DecodeError::Version(_))));
        assert!(matches!(decode(r#"{"version":"1","type":"end"}"#), Err(DecodeError::Version(_))));
    }

    #[test]
    fn malformed_messages() {
        for text in [
            "not json",
            "[1]",
            r#"{"version":1,"type":"wave"}"#,
            r#"{"version":1,"type":"fingers","left":[0,0,0],"right":[0,0,0,0,0],"t_ms":0}"#,
            r#"{"version":1,"type":"keys","pressed":[],"t_ms":0,"extra":1}"#,
        ] {
            assert!(matches!(decode(text), Err(DecodeError::Malformed(_))), "{text}");
        }
    }

    #[test]
    fn outbound_carries_version() {
        let msg = Outbound::Task { task_id: 3, prompt: "radio volume up 2".into(), t_ms: 10.0 };
        let text = encode(&msg);
        assert!(text.starts_with(r#"{"version":1,"type":"task""#), "{text}");
        assert_eq!(decode_outbound(&text).unwrap(), msg);
    }
}
