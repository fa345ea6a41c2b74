//! Local WebSocket endpoint the overlay UI connects to.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};

use super::{ClientMessage, OverlayError, ServerMessage};

fn protocol_err(e: impl std::fmt::Display) -> OverlayError {
    OverlayError::Protocol(e.to_string())
}

/// Listens on loopback for the overlay UI.
#[derive(Debug)]
pub struct OverlayServer {
    listener: TcpListener,
}

impl OverlayServer {
    /// Binds `127.0.0.1:port`; port 0 picks a free one.
    pub fn bind(port: u16) -> Result<Self, OverlayError> {
        let listener = TcpListener::bind(("127.0.0.1", port))
            .map_err(|e| OverlayError::Unavailable(format!("bind port {port}: {e}")))?;
        Ok(OverlayServer { listener })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Waits for one UI client and completes the WebSocket handshake.
    pub fn accept(&self, timeout: Duration) -> Result<OverlaySession, OverlayError> {
        self.listener.set_nonblocking(true).map_err(protocol_err)?;
        let deadline = Instant::now() + timeout;
        let stream = loop {
            match self.listener.accept() {
                Ok((s, _)) => break s,
                Err(e) if e.kind() == ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(OverlayError::Unavailable(
                            "no overlay client connected".into(),
                        ));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(protocol_err(e)),
            }
        };
        stream.set_nonblocking(false).map_err(protocol_err)?;
        stream.set_nodelay(true).map_err(protocol_err)?;
        let ws = tungstenite::accept(stream).map_err(protocol_err)?;
        Ok(OverlaySession { ws })
    }
}

/// One connected overlay UI.
#[derive(Debug)]
pub struct OverlaySession {
    ws: WebSocket<TcpStream>,
}

impl OverlaySession {
    pub fn send(&mut self, msg: &ServerMessage) -> Result<(), OverlayError> {
        self.ws.send(Message::text(msg.to_json())).map_err(|e| match e {
            tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed => {
                OverlayError::Unavailable("overlay client disconnected".into())
            }
            other => protocol_err(other),
        })
    }

    /// Next client message, or `None` if nothing arrived within `timeout`.
    /// Pings and other control frames are handled transparently.
    pub fn recv(&mut self, timeout: Duration) -> Result<Option<ClientMessage>, OverlayError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            self.ws
                .get_mut()
                .set_read_timeout(Some(left))
                .map_err(protocol_err)?;
            match self.ws.read() {
                Ok(Message::Text(t)) => {
                    return serde_json::from_str(t.as_str())
                        .map(Some)
                        .map_err(|e| protocol_err(format!("bad client message: {e}")))
                }
                Ok(Message::Close(_)) => {
                    return Err(OverlayError::Unavailable("overlay client closed".into()))
                }
                Ok(_) => continue,
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) =>
                {
                    return Ok(None)
                }
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                    return Err(OverlayError::Unavailable("overlay client disconnected".into()))
                }
                Err(e) => return Err(protocol_err(e)),
            }
        }
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        let _ = self.ws.flush();
    }
}
