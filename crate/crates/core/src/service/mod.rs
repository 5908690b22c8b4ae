//! Interactive websocket service: one simulation per connection, streamed
//! as rendered frames and steered by drag messages.

pub mod protocol;
pub mod server;
pub mod session;
pub mod worker;

pub use protocol::{ClientMessage, RunStatus, ServerMessage, PROTOCOL_VERSION, SESSION_PATH};
pub use server::Server;
pub use session::{Session, SessionConfig};
pub use worker::Worker;
