//! Stepping thread of one session. Connection handlers talk to it only
//! through the command queue and receive encoded-ready messages back, so
//! simulation state never leaves the thread.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::protocol::{ClientMessage, ServerMessage};
use super::session::Session;

#[derive(Debug)]
pub enum Command {
    /// A client message and the moment it arrived.
    Message(ClientMessage, Instant),
    Stop,
}

pub struct Worker {
    commands: Sender<Command>,
    handle: Option<JoinHandle<Session>>,
}

impl Worker {
    /// Moves `session` onto a new thread. Responses and frames go to the
    /// returned receiver in the order they were produced.
    pub fn spawn(session: Session) -> (Self, Receiver<ServerMessage>) {
        let (cmd_tx, cmd_rx) = mpsc::channel();
        let (out_tx, out_rx) = mpsc::channel();
        let handle = std::thread::Builder::new()
            .name("session-worker".into())
            .spawn(move || run(session, cmd_rx, out_tx))
            .expect("spawning a thread");
        (Worker { commands: cmd_tx, handle: Some(handle) }, out_rx)
    }

    pub fn send(&self, msg: ClientMessage) {
        // A closed queue means the worker already stopped; nothing to do.
        let _ = self.commands.send(Command::Message(msg, Instant::now()));
    }

    /// Stops the loop and hands the session back.
    pub fn stop(mut self) -> Option<Session> {
        let _ = self.commands.send(Command::Stop);
        self.handle.take().and_then(|h| h.join().ok())
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        if let Some(h) = self.handle.take() {
            let _ = self.commands.send(Command::Stop);
            let _ = h.join();
        }
    }
}

/// Handles queued commands between frames and ticks the session on a fixed
/// wall-clock cadence. A late tick moves the schedule forward instead of
/// bursting to catch up.
fn run(mut session: Session, commands: Receiver<Command>, out: Sender<ServerMessage>) -> Session {
    let interval = Duration::from_secs_f64(1.0 / session.config().fps);
    let stepping = interval.mul_f64(session.config().step_budget);
    let origin = Instant::now();
    let mut next = origin + interval;
    loop {
        let now = Instant::now();
        if now >= next {
            for msg in session.tick(Some(now + stepping)) {
                if out.send(msg).is_err() {
                    return session;
                }
            }
            next = (next + interval).max(Instant::now());
            continue;
        }
        match commands.recv_timeout(next - now) {
            Ok(Command::Message(msg, at)) => {
                let wall = at.saturating_duration_since(origin).as_secs_f64();
                for reply in session.handle(msg, wall) {
                    if out.send(reply).is_err() {
                        return session;
                    }
                }
            }
            Ok(Command::Stop) | Err(RecvTimeoutError::Disconnected) => return session,
            Err(RecvTimeoutError::Timeout) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::protocol::RunStatus;
    use crate::service::session::tests::block_scene;
    use crate::service::session::SessionConfig;

    fn session() -> Session {
        Session::new(block_scene(3), SessionConfig::default()).unwrap()
    }

    #[test]
    fn replies_in_order_and_streams_when_running() {
        let (w, rx) = Worker::spawn(session());
        w.send(ClientMessage::Hello { protocol: 1 });
        w.send(ClientMessage::Start);
        assert_eq!(rx.recv_timeout(Duration::from_secs(5)).unwrap().kind(), "hello");
        assert!(matches!(
            rx.recv_timeout(Duration::from_secs(5)).unwrap(),
            ServerMessage::Ack { status: RunStatus::Running, .. }
        ));
        let mut last = None;
        for _ in 0..3 {
            match rx.recv_timeout(Duration::from_secs(10)).unwrap() {
                ServerMessage::Frame { index, sim_time, .. } => {
                    if let Some((i, t)) = last {
                        assert_eq!(index, i + 1);
                        assert!(sim_time > t);
                    }
                    last = Some((index, sim_time));
                }
                other => panic!("expected a frame, got {other:?}"),
            }
        }
        let s = w.stop().unwrap();
        assert_eq!(s.status(), RunStatus::Running);
    }

    #[test]
    fn paused_worker_is_silent() {
        let (w, rx) = Worker::spawn(session());
        assert!(rx.recv_timeout(Duration::from_millis(400)).is_err());
        let s = w.stop().unwrap();
        assert_eq!(s.sim_time(), 0.0);
    }
}
