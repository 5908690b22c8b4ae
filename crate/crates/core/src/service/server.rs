//! Websocket endpoint. Each connection gets its own session and worker, so
//! clients never share simulation state.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::TryRecvError;
use std::time::Duration;

use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::http::StatusCode;
use tungstenite::Message;

use super::protocol::{ClientMessage, ServerMessage, SESSION_PATH};
use super::session::{Session, SessionConfig};
use super::worker::Worker;
use crate::error::{Error, Result};
use crate::scene::Scene;

/// How long a connection waits for client input before flushing frames.
const POLL: Duration = Duration::from_millis(10);

pub struct Server {
    listener: TcpListener,
    scene: Scene,
    config: SessionConfig,
}

impl Server {
    /// Checks the scene and configuration, then binds. An address in use is
    /// reported as a configuration error.
    pub fn bind(addr: impl ToSocketAddrs, scene: Scene, config: SessionConfig) -> Result<Self> {
        Session::new(scene.clone(), config.clone())?;
        let listener = TcpListener::bind(addr).map_err(|e| match e.kind() {
            ErrorKind::AddrInUse => Error::InvalidConfig(format!("address in use: {e}")),
            _ => Error::Io(e),
        })?;
        Ok(Server { listener, scene, config })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until the listener fails.
    pub fn run(self) -> Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let scene = self.scene.clone();
            let config = self.config.clone();
            std::thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = serve_connection(stream, scene, config) {
                    log::warn!("connection {peer:?} closed: {e}");
                }
            });
        }
        Ok(())
    }
}

fn check_path(req: &Request, resp: Response) -> std::result::Result<Response, ErrorResponse> {
    if req.uri().path() == SESSION_PATH {
        return Ok(resp);
    }
    let mut err = ErrorResponse::new(Some(format!("no endpoint at {}", req.uri().path())));
    *err.status_mut() = StatusCode::NOT_FOUND;
    Err(err)
}

fn ws_error(e: tungstenite::Error) -> Error {
    match e {
        tungstenite::Error::Io(io) => Error::Io(io),
        other => Error::Protocol(other.to_string()),
    }
}

fn serve_connection(stream: TcpStream, scene: Scene, config: SessionConfig) -> Result<()> {
    let mut ws = tungstenite::accept_hdr(stream, check_path)
        .map_err(|e| Error::Protocol(format!("handshake failed: {e}")))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let (worker, replies) = Worker::spawn(Session::new(scene, config)?);
    loop {
        match ws.read() {
            Ok(Message::Text(text)) => match ClientMessage::decode(&text) {
                Ok(msg) => worker.send(msg),
                Err(e) => ws.send(Message::Text(ServerMessage::error(e, None).encode())).map_err(ws_error)?,
            },
            Ok(Message::Binary(_)) => {
                let err = ServerMessage::error("binary messages are not supported", None);
                ws.send(Message::Text(err.encode())).map_err(ws_error)?;
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                return Ok(())
            }
            Err(e) => return Err(ws_error(e)),
        }
        loop {
            match replies.try_recv() {
                Ok(msg) => ws.send(Message::Text(msg.encode())).map_err(ws_error)?,
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
    }
}
