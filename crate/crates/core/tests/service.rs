mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use serde_json::Value;
use tissuesim::service::protocol::{open_envelope, ClusterParams, ParamRanges};
use tissuesim::service::{ClientMessage, RunStatus, Server, ServerMessage, SessionConfig};
use tissuesim::{CameraSpec, Error};
use tungstenite::{Message, WebSocket};

fn schema() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/session-v1.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn check_against(schema: &Value, side: &str, record: &str) -> String {
    let (kind, body) = open_envelope(record).unwrap();
    let fields = schema[side][kind].as_object().unwrap_or_else(|| panic!("{side} kind {kind} missing"));
    let body: BTreeMap<String, Value> = serde_json::from_str(body).unwrap();
    for key in body.keys() {
        assert!(fields.contains_key(key), "{side}/{kind}: field {key} not in schema");
    }
    for (name, spec) in fields {
        if spec["required"].as_bool().unwrap() {
            assert!(body.contains_key(name), "{side}/{kind}: required {name} absent");
        }
    }
    kind.to_owned()
}

#[test]
fn schema_matches_every_message_kind() {
    let schema = schema();
    assert_eq!(schema["protocol"], 1);
    assert_eq!(schema["endpoint"], "/session");
    let client = [
        ClientMessage::Hello { protocol: 1 },
        ClientMessage::Start,
        ClientMessage::Pause,
        ClientMessage::Reset,
        ClientMessage::SetParams { cluster: 0, mu_e: Some(1.0), eta_v: Some(1.0), gamma_v: Some(1.0) },
        ClientMessage::SetParams { cluster: 0, mu_e: None, eta_v: None, gamma_v: None },
        ClientMessage::DragStart { x: 1.0, y: 2.0, radius: Some(0.1) },
        ClientMessage::DragMove { drag_id: 1, x: 1.0, y: 2.0 },
        ClientMessage::DragEnd { drag_id: 1 },
    ];
    let seen: BTreeSet<String> = client.iter().map(|m| check_against(&schema, "client", &m.encode())).collect();
    let listed: BTreeSet<String> = schema["client"].as_object().unwrap().keys().cloned().collect();
    assert_eq!(seen, listed);

    let server = [
        ServerMessage::Hello {
            protocol: 1,
            bounds_min: [0.0; 3],
            bounds_max: [1.0; 3],
            camera: CameraSpec::default(),
            particles: 3,
            clusters: vec![ClusterParams { cluster: 0, mu_e: 1.0, eta_v: 1.0, gamma_v: 1.0 }],
            ranges: ParamRanges { mu_e: [1.0, 2.0], eta_v: [1.0, 2.0], gamma_v: [1.0, 2.0] },
            fps: 10.0,
            drag_radius: 0.1,
            status: RunStatus::Paused,
        },
        ServerMessage::Ack { request: "start".into(), status: RunStatus::Running },
        ServerMessage::DragStarted { drag_id: 1, point: [0.0; 3], tagged: 4 },
        ServerMessage::Frame { index: 0, sim_time: 0.0, width: 1, height: 1, png: String::new() },
        ServerMessage::error("x", Some("start")),
        ServerMessage::error("x", None),
    ];
    let seen: BTreeSet<String> = server.iter().map(|m| check_against(&schema, "server", &m.encode())).collect();
    let listed: BTreeSet<String> = schema["server"].as_object().unwrap().keys().cloned().collect();
    assert_eq!(seen, listed);
}

fn serve() -> std::net::SocketAddr {
    let server = Server::bind("127.0.0.1:0", common::block_scene(6), SessionConfig::default()).unwrap();
    let addr = server.local_addr().unwrap();
    std::thread::spawn(move || server.run());
    addr
}

fn connect(addr: std::net::SocketAddr) -> WebSocket<TcpStream> {
    let stream = TcpStream::connect(addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
    let (ws, _) = tungstenite::client(format!("ws://{addr}/session"), stream).unwrap();
    ws
}

fn send(ws: &mut WebSocket<TcpStream>, msg: ClientMessage) {
    ws.send(Message::Text(msg.encode())).unwrap();
}

fn recv(ws: &mut WebSocket<TcpStream>) -> ServerMessage {
    loop {
        if let Message::Text(t) = ws.read().unwrap() {
            return ServerMessage::decode(&t).unwrap();
        }
    }
}

/// Next message that is not a frame.
fn reply(ws: &mut WebSocket<TcpStream>) -> ServerMessage {
    loop {
        let m = recv(ws);
        if m.kind() != "frame" {
            return m;
        }
    }
}

#[test]
fn websocket_session_round_trip() {
    let addr = serve();
    let mut ws = connect(addr);
    send(&mut ws, ClientMessage::Hello { protocol: 1 });
    match recv(&mut ws) {
        ServerMessage::Hello { particles, status, .. } => {
            assert_eq!(particles, 216);
            assert_eq!(status, RunStatus::Paused);
        }
        other => panic!("{other:?}"),
    }

    // Malformed input gets an error and the session carries on.
    ws.send(Message::Text("start:9:{}".into())).unwrap();
    assert!(matches!(recv(&mut ws), ServerMessage::Error { request: None, .. }));
    ws.send(Message::Binary(vec![1, 2, 3])).unwrap();
    assert!(matches!(recv(&mut ws), ServerMessage::Error { .. }));
    send(&mut ws, ClientMessage::DragEnd { drag_id: 42 });
    assert!(matches!(recv(&mut ws), ServerMessage::Error { request: Some(r), .. } if r == "drag_end"));

    send(&mut ws, ClientMessage::DragStart { x: 160.0, y: 120.0, radius: None });
    let id = match recv(&mut ws) {
        ServerMessage::DragStarted { drag_id, tagged, .. } => {
            assert!(tagged > 0);
            drag_id
        }
        other => panic!("{other:?}"),
    };
    send(&mut ws, ClientMessage::Start);
    assert!(matches!(reply(&mut ws), ServerMessage::Ack { status: RunStatus::Running, .. }));
    for step in 1..=3 {
        send(&mut ws, ClientMessage::DragMove { drag_id: id, x: 160.0 + 4.0 * step as f64, y: 120.0 });
        std::thread::sleep(Duration::from_millis(50));
    }
    let mut last = None;
    for _ in 0..3 {
        if let ServerMessage::Frame { index, sim_time, png, .. } = recv(&mut ws) {
            assert!(!png.is_empty());
            if let Some((i, t)) = last {
                assert!(index > i && sim_time > t);
            }
            last = Some((index, sim_time));
        }
    }
    send(&mut ws, ClientMessage::DragEnd { drag_id: id });
    assert!(matches!(reply(&mut ws), ServerMessage::Ack { .. }));
    send(&mut ws, ClientMessage::Pause);
    assert!(matches!(reply(&mut ws), ServerMessage::Ack { status: RunStatus::Paused, .. }));
    send(&mut ws, ClientMessage::Reset);
    assert!(matches!(reply(&mut ws), ServerMessage::Ack { .. }));
    match recv(&mut ws) {
        ServerMessage::Frame { sim_time, .. } => assert_eq!(sim_time, 0.0),
        other => panic!("{other:?}"),
    }
    ws.close(None).unwrap();
}

#[test]
fn sessions_are_isolated() {
    let addr = serve();
    let mut a = connect(addr);
    let mut b = connect(addr);
    send(&mut a, ClientMessage::SetParams { cluster: 0, mu_e: Some(5e3), eta_v: None, gamma_v: None });
    assert!(matches!(recv(&mut a), ServerMessage::Ack { .. }));
    send(&mut a, ClientMessage::Start);
    assert!(matches!(recv(&mut a), ServerMessage::Ack { .. }));
    send(&mut b, ClientMessage::Hello { protocol: 1 });
    match recv(&mut b) {
        ServerMessage::Hello { clusters, status, .. } => {
            assert_eq!(clusters[0].mu_e, 2e3);
            assert_eq!(status, RunStatus::Paused);
        }
        other => panic!("{other:?}"),
    }
    // A paused session stays silent while the other one streams.
    b.get_ref().set_read_timeout(Some(Duration::from_millis(500))).unwrap();
    let start = Instant::now();
    assert!(b.read().is_err());
    assert!(start.elapsed() >= Duration::from_millis(400));
    assert!(matches!(recv(&mut a), ServerMessage::Frame { .. }));
}

#[test]
fn other_paths_are_not_found() {
    let addr = serve();
    let stream = TcpStream::connect(addr).unwrap();
    match tungstenite::client(format!("ws://{addr}/other"), stream) {
        Err(tungstenite::HandshakeError::Failure(tungstenite::Error::Http(resp))) => {
            assert_eq!(resp.status(), 404)
        }
        other => panic!("expected 404, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn occupied_port_is_a_configuration_error() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let err = Server::bind(taken.local_addr().unwrap(), common::block_scene(3), SessionConfig::default())
        .err()
        .unwrap();
    assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
    assert!(err.is_validation());
}
