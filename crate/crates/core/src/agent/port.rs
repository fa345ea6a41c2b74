use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crate::overlay::{ClientMessage, OverlayError, OverlayFrame, OverlaySession, ServerMessage};

/// Where the agent sends frames and reads user events from.
pub trait OverlayPort {
    fn is_connected(&self) -> bool;
    fn present(&mut self, frame: &OverlayFrame) -> Result<(), OverlayError>;
    fn dismiss(&mut self, frame_id: u64) -> Result<(), OverlayError>;
    /// Next user event, or `None` after `timeout`.
    fn next_event(&mut self, timeout: Duration) -> Result<Option<ClientMessage>, OverlayError>;
}

/// No UI at all. Voice-only frames are fine; anything visual fails.
#[derive(Debug, Clone, Copy, Default)]
pub struct Disconnected;

impl OverlayPort for Disconnected {
    fn is_connected(&self) -> bool {
        false
    }

    fn present(&mut self, _frame: &OverlayFrame) -> Result<(), OverlayError> {
        Err(OverlayError::Unavailable("no overlay client connected".into()))
    }

    fn dismiss(&mut self, _frame_id: u64) -> Result<(), OverlayError> {
        Ok(())
    }

    fn next_event(&mut self, _timeout: Duration) -> Result<Option<ClientMessage>, OverlayError> {
        Err(OverlayError::Unavailable("no overlay client connected".into()))
    }
}

/// Talks to the session directly on the caller's thread.
impl OverlayPort for OverlaySession {
    fn is_connected(&self) -> bool {
        true
    }

    fn present(&mut self, frame: &OverlayFrame) -> Result<(), OverlayError> {
        self.send(&ServerMessage::from_frame(frame))
    }

    fn dismiss(&mut self, frame_id: u64) -> Result<(), OverlayError> {
        self.send(&ServerMessage::Dismiss { frame_id })
    }

    fn next_event(&mut self, timeout: Duration) -> Result<Option<ClientMessage>, OverlayError> {
        self.recv(timeout)
    }
}

/// Queue-backed port whose WebSocket session runs on its own thread.
#[derive(Debug)]
pub struct ChannelPort {
    frames: Option<Sender<ServerMessage>>,
    events: Receiver<Result<ClientMessage, OverlayError>>,
    alive: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

const POLL: Duration = Duration::from_millis(10);

/// Moves `session` onto a worker thread. Frames flow out through one
/// queue and user events come back through another.
pub fn spawn_session(mut session: OverlaySession) -> ChannelPort {
    let (frame_tx, frame_rx) = mpsc::channel::<ServerMessage>();
    let (event_tx, event_rx) = mpsc::channel();
    let alive = Arc::new(AtomicBool::new(true));
    let flag = Arc::clone(&alive);
    let worker = std::thread::spawn(move || {
        let fail = |e: OverlayError| {
            flag.store(false, Ordering::SeqCst);
            let _ = event_tx.send(Err(e));
        };
        loop {
            loop {
                match frame_rx.try_recv() {
                    Ok(msg) => {
                        if let Err(e) = session.send(&msg) {
                            return fail(e);
                        }
                    }
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => {
                        session.close();
                        flag.store(false, Ordering::SeqCst);
                        return;
                    }
                }
            }
            match session.recv(POLL) {
                Ok(Some(msg)) => {
                    if event_tx.send(Ok(msg)).is_err() {
                        return;
                    }
                }
                Ok(None) => {}
                Err(e) => return fail(e),
            }
        }
    });
    ChannelPort {
        frames: Some(frame_tx),
        events: event_rx,
        alive,
        worker: Some(worker),
    }
}

impl ChannelPort {
    fn send(&self, msg: ServerMessage) -> Result<(), OverlayError> {
        self.frames
            .as_ref()
            .and_then(|tx| tx.send(msg).ok())
            .ok_or_else(|| OverlayError::Unavailable("overlay session ended".into()))
    }
}

impl OverlayPort for ChannelPort {
    fn is_connected(&self) -> bool {
        self.alive.load(Ordering::SeqCst)
    }

    fn present(&mut self, frame: &OverlayFrame) -> Result<(), OverlayError> {
        self.send(ServerMessage::from_frame(frame))
    }

    fn dismiss(&mut self, frame_id: u64) -> Result<(), OverlayError> {
        self.send(ServerMessage::Dismiss { frame_id })
    }

    fn next_event(&mut self, timeout: Duration) -> Result<Option<ClientMessage>, OverlayError> {
        match self.events.recv_timeout(timeout) {
            Ok(r) => r.map(Some),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => {
                Err(OverlayError::Unavailable("overlay session ended".into()))
            }
        }
    }
}

impl Drop for ChannelPort {
    /// Flushes queued frames and closes the socket.
    fn drop(&mut self) {
        self.frames.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}
