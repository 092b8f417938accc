//! The kernel as a service: a JSON request/response protocol for editor
//! frontends, carried as newline-delimited JSON on stdio or as HTTP POSTs
//! with one route per method.

pub mod protocol;
mod session;
pub mod transport;

pub use protocol::{Notification, Request, Response, PROTOCOL_VERSION};
pub use session::Session;
