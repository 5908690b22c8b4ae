//! Wire format of the interactive session.
//!
//! Every websocket text message holds one record `KIND:LEN:BODY`, where
//! `KIND` is a lowercase message kind, `LEN` the byte length of `BODY` in
//! decimal, and `BODY` a JSON object with the message fields. The field
//! layout of each kind is listed in `schema/session-v1.json`.

use serde::{Deserialize, Serialize};

use crate::camera::CameraSpec;
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

/// Websocket path of the session endpoint.
pub const SESSION_PATH: &str = "/session";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        protocol: u32,
    },
    Start,
    Pause,
    Reset,
    /// Overrides the parameters of one cluster; absent fields keep their
    /// value.
    SetParams {
        cluster: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu_e: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_v: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma_v: Option<f64>,
    },
    /// Grabs the tissue under pixel `(x, y)`.
    DragStart {
        x: f64,
        y: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    DragMove {
        drag_id: u64,
        x: f64,
        y: f64,
    },
    DragEnd {
        drag_id: u64,
    },
}

impl ClientMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::Hello { .. } => "hello",
            ClientMessage::Start => "start",
            ClientMessage::Pause => "pause",
            ClientMessage::Reset => "reset",
            ClientMessage::SetParams { .. } => "set_params",
            ClientMessage::DragStart { .. } => "drag_start",
            ClientMessage::DragMove { .. } => "drag_move",
            ClientMessage::DragEnd { .. } => "drag_end",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Paused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub cluster: usize,
    pub mu_e: f64,
    pub eta_v: f64,
    pub gamma_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub mu_e: [f64; 2],
    pub eta_v: [f64; 2],
    pub gamma_v: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        protocol: u32,
        bounds_min: [f64; 3],
        bounds_max: [f64; 3],
        camera: CameraSpec,
        particles: usize,
        clusters: Vec<ClusterParams>,
        ranges: ParamRanges,
        fps: f64,
        drag_radius: f64,
        status: RunStatus,
    },
    Ack {
        request: String,
        status: RunStatus,
    },
    DragStarted {
        drag_id: u64,
        point: [f64; 3],
        tagged: usize,
    },
    Frame {
        index: u64,
        sim_time: f64,
        width: usize,
        height: usize,
        /// Base64 of an 8-bit RGB PNG.
        png: String,
    },
    Error {
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request: Option<String>,
    },
}

impl ServerMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ServerMessage::Hello { .. } => "hello",
            ServerMessage::Ack { .. } => "ack",
            ServerMessage::DragStarted { .. } => "drag_started",
            ServerMessage::Frame { .. } => "frame",
            ServerMessage::Error { .. } => "error",
        }
    }

    pub fn error(message: impl ToString, request: Option<&str>) -> Self {
        ServerMessage::Error {
            message: message.to_string(),
            request: request.map(str::to_owned),
        }
    }
}

/// Wraps a body in the length-prefixed record.
pub fn envelope(kind: &str, body: &str) -> String {
    format!("{kind}:{}:{body}", body.len())
}

/// Splits a record into kind and body, checking the declared length.
pub fn open_envelope(record: &str) -> Result<(&str, &str)> {
    let bad = |m: &str| Error::Protocol(m.to_owned());
    let (kind, rest) = record.split_once(':').ok_or_else(|| bad("missing kind separator"))?;
    let (len, body) = rest.split_once(':').ok_or_else(|| bad("missing length separator"))?;
    if kind.is_empty() || !kind.bytes().all(|b| b.is_ascii_lowercase() || b == b'_') {
        return Err(bad("kind must be lowercase letters and underscores"));
    }
    let len: usize = len.parse().map_err(|_| bad("length is not a decimal integer"))?;
    if len != body.len() {
        return Err(Error::Protocol(format!(
            "declared length {len} but body has {} bytes",
            body.len()
        )));
    }
    Ok((kind, body))
}

fn encode<T: Serialize>(msg: &T) -> String {
    let mut value = serde_json::to_value(msg).expect("messages serialize");
    let obj = value.as_object_mut().expect("messages are objects");
    let kind = match obj.remove("kind") {
        Some(serde_json::Value::String(k)) => k,
        _ => unreachable!("tagged enums carry a kind"),
    };
    envelope(&kind, &value.to_string())
}

fn decode<T: for<'de> Deserialize<'de>>(record: &str) -> Result<T> {
    let (kind, body) = open_envelope(record)?;
    let mut value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| Error::Protocol(format!("{kind}: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Protocol(format!("{kind}: body must be a JSON object")))?;
    obj.insert("kind".into(), kind.into());
    serde_json::from_value(value).map_err(|e| Error::Protocol(format!("{kind}: {e}")))
}

impl ClientMessage {
    pub fn encode(&self) -> String {
        encode(self)
    }

    pub fn decode(record: &str) -> Result<Self> {
        decode(record)
    }
}

impl ServerMessage {
    pub fn encode(&self) -> String {
        encode(self)
    }

    pub fn decode(record: &str) -> Result<Self> {
        decode(record)
    }
}
