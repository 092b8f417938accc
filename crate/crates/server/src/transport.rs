use std::io::{BufRead, Write};
use std::sync::Mutex;

use serde_json::Value;

use crate::protocol::{ErrorBody, ErrorCode, Request, Response};
use crate::Session;

fn write_json<W: Write, T: serde::Serialize>(out: &mut W, v: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, v)?;
    out.write_all(b"\n")?;
    out.flush()
}

/// Serves requests read line by line until end of input or `shutdown`.
/// Notifications follow the response that caused them.
pub fn serve_stdio<R: BufRead, W: Write>(session: &mut Session, input: R, mut output: W) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = session.handle_line(&line);
        write_json(&mut output, &resp)?;
        for n in session.drain_notifications() {
            write_json(&mut output, &n)?;
        }
        if session.stopped() {
            break;
        }
    }
    Ok(())
}

/// Answers one HTTP request: `POST /<method>` with the params as body, or
/// `POST /notifications` to collect pending notifications.
pub fn http_reply(session: &Mutex<Session>, method: &str, url: &str, body: &str) -> (u16, String) {
    let name = url.trim_start_matches('/').split('?').next().unwrap_or("");
    let mut s = session.lock().unwrap_or_else(|e| e.into_inner());
    if method != "POST" {
        let err = Response {
            id: Value::Null,
            result: None,
            error: Some(ErrorBody::new(ErrorCode::MethodNotFound, "use POST /<method>")),
        };
        return (405, serde_json::to_string(&err).expect("serializable"));
    }
    if name == "notifications" {
        return (200, serde_json::to_string(&s.drain_notifications()).expect("serializable"));
    }
    let params = if body.trim().is_empty() {
        Ok(Value::Null)
    } else {
        serde_json::from_str::<Value>(body)
    };
    let resp = match params {
        Ok(params) => s.handle(Request {
            id: Value::Null,
            method: name.to_string(),
            params,
        }),
        Err(e) => Response {
            id: Value::Null,
            result: None,
            error: Some(ErrorBody::new(ErrorCode::ParseError, e.to_string())),
        },
    };
    let status = match resp.error.as_ref().map(|e| e.code) {
        None => 200,
        Some(ErrorCode::MethodNotFound) | Some(ErrorCode::NotFound) => 404,
        Some(ErrorCode::StaleVersion) => 409,
        Some(_) => 400,
    };
    (status, serde_json::to_string(&resp).expect("serializable"))
}

/// Blocks serving HTTP on `addr` until a `shutdown` request.
pub fn serve_http(session: Session, addr: &str) -> std::io::Result<()> {
    let server = tiny_http::Server::http(addr).map_err(std::io::Error::other)?;
    serve_http_on(session, server)
}

pub fn serve_http_on(session: Session, server: tiny_http::Server) -> std::io::Result<()> {
    log::info!("listening on http://{}", server.server_addr());
    let session = Mutex::new(session);
    for mut req in server.incoming_requests() {
        let mut body = String::new();
        if let Err(e) = req.as_reader().read_to_string(&mut body) {
            log::warn!("unreadable request body: {e}");
        }
        let (status, text) = http_reply(&session, req.method().as_str(), req.url(), &body);
        let header = tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("static header");
        let resp = tiny_http::Response::from_string(text).with_status_code(status).with_header(header);
        if let Err(e) = req.respond(resp) {
            log::warn!("could not answer: {e}");
        }
        if session.lock().unwrap_or_else(|e| e.into_inner()).stopped() {
            break;
        }
    }
    Ok(())
}
