//! TCP transport: one request frame per connection, one thread per
//! connection, immutable server state shared across threads.

use std::io::Write;
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::thread;

use crate::dealer::Credential;
use crate::error::Result;
use crate::server::{Answer, Rejection, ServerState};
use crate::wire::{answer_frame, decode_query, Frame, FrameKind, WireError};

/// A server plus the log a semi-honest operator keeps: every query payload
/// it received, in arrival order.
#[derive(Debug)]
pub struct ServerHost {
    state: ServerState,
    observed: Mutex<Vec<Vec<u8>>>,
}

impl ServerHost {
    pub fn new(state: ServerState) -> Self {
        Self {
            state,
            observed: Mutex::new(Vec::new()),
        }
    }

    pub fn state(&self) -> &ServerState {
        &self.state
    }

    pub fn observed(&self) -> Vec<Vec<u8>> {
        self.observed.lock().expect("log lock").clone()
    }

    /// Request frame bytes in, response frame bytes out. Shared by the TCP
    /// listener and in-process sessions so both produce the same bytes.
    pub fn handle_request(&self, bytes: &[u8]) -> Vec<u8> {
        let response = match Frame::decode(bytes) {
            Ok(frame) => self.respond(&frame),
            Err(e) => error_frame(&e),
        };
        response.encode().expect("responses fit a frame")
    }

    fn respond(&self, frame: &Frame) -> Frame {
        match frame.kind {
            FrameKind::Query => {
                self.observed.lock().expect("log lock").push(frame.payload.clone());
                match decode_query(&frame.payload, self.state.params()) {
                    Ok(q) => {
                        let answer = match self.authenticate(q.token) {
                            Ok(credential) => self.state.answer_query(&crate::client::Query {
                                credential,
                                items: q.items,
                            }),
                            Err(r) => Answer::Rejected(r),
                        };
                        answer_frame(&answer).unwrap_or_else(|e| error_frame(&e))
                    }
                    Err(e) => error_frame(&e),
                }
            }
            FrameKind::CredentialCheck => {
                let token = match frame.payload.as_slice().try_into() {
                    Ok(bytes) => crate::dealer::Token(bytes),
                    Err(_) => {
                        return error_frame(&WireError::Invalid("credential check needs a 16-byte token".into()))
                    }
                };
                match self.authenticate(token) {
                    Ok(c) => Frame::new(FrameKind::CredentialCheck, c.value.to_le_bytes().to_vec()),
                    Err(r) => Frame::new(FrameKind::Reject, vec![r.code()]),
                }
            }
            other => error_frame(&WireError::BadKind(other as u8)),
        }
    }

    // The wire carries only the bearer token; position and value come from
    // this server's table.
    fn authenticate(&self, token: crate::dealer::Token) -> std::result::Result<Credential, Rejection> {
        let attr = self.state.tokens().lookup(&token).ok_or(Rejection::UnknownToken)?;
        let credential = Credential {
            position: self.state.index(),
            value: attr.value,
            token,
        };
        self.state.verify_credential(&credential)?;
        Ok(credential)
    }
}

fn error_frame(e: &WireError) -> Frame {
    let mut payload = vec![e.code()];
    payload.extend_from_slice(e.to_string().as_bytes());
    Frame::new(FrameKind::Error, payload)
}

/// Accepts connections until the listener fails. Each connection carries
/// one request frame and gets one response frame.
pub fn serve(host: Arc<ServerHost>, listener: TcpListener) -> Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let host = Arc::clone(&host);
        thread::spawn(move || {
            let _ = handle_connection(&host, stream);
        });
    }
    Ok(())
}

fn handle_connection(host: &ServerHost, mut stream: TcpStream) -> std::io::Result<()> {
    let response = match Frame::read_from(&mut stream)? {
        Ok(frame) => host.handle_request(&frame.encode().expect("read frames fit")),
        Err(e) => error_frame(&e).encode().expect("error frames fit"),
    };
    stream.write_all(&response)?;
    stream.flush()?;
    stream.shutdown(Shutdown::Write)
}

/// Sends one request frame and returns the raw response frame.
pub fn remote_request(addr: impl ToSocketAddrs, request: &[u8]) -> Result<Vec<u8>> {
    let mut stream = TcpStream::connect(addr)?;
    stream.write_all(request)?;
    stream.flush()?;
    let frame = Frame::read_from(&mut stream)??;
    Ok(frame.encode()?)
}

/// Binds, reports the bound address, then serves on a background thread.
pub fn spawn_server(host: Arc<ServerHost>, addr: impl ToSocketAddrs) -> Result<std::net::SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    thread::spawn(move || serve(host, listener));
    Ok(local)
}
