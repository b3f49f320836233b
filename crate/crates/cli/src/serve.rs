//! Live engine behind a WebSocket endpoint.
//!
//! One viewer at a time. While a viewer is connected the engine runs in
//! real time, snapshots go out at a fixed rate, and incoming commands are
//! acknowledged immediately and applied at the next tick. The engine keeps
//! its state across reconnects and pauses while nobody is connected.

use std::io;
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use tungstenite::{Message, WebSocket};

use televiz::harness::wire::WireMessage;
use televiz::harness::{Engine, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServeOptions {
    pub snapshot_hz: f64,
    /// Stop after this many viewer sessions; `None` serves forever.
    pub max_sessions: Option<usize>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            snapshot_hz: 20.0,
            max_sessions: None,
        }
    }
}

pub fn serve(config: ScenarioConfig, listener: TcpListener, options: ServeOptions) -> Result<()> {
    let mut engine = Engine::new(config)?;
    for (done, stream) in listener.incoming().enumerate() {
        let stream = stream.context("accepting connection")?;
        let peer = stream.peer_addr().ok();
        log::info!("viewer connected from {peer:?}");
        match session(&mut engine, stream, &options) {
            Ok(()) => log::info!("viewer {peer:?} left at tick {}", engine.tick()),
            Err(e) => log::warn!("viewer {peer:?} dropped: {e:#}"),
        }
        if options.max_sessions.is_some_and(|m| done + 1 >= m) {
            break;
        }
    }
    Ok(())
}

fn send(ws: &mut WebSocket<TcpStream>, msg: &WireMessage) -> Result<()> {
    let text = serde_json::to_string(msg).context("encoding message")?;
    ws.send(Message::text(text)).context("sending message")
}

/// Parses one text message and queues it; the reply is an ack or an error.
fn handle_text(engine: &mut Engine, text: &str) -> WireMessage {
    match serde_json::from_str::<WireMessage>(text) {
        Ok(WireMessage::Command { id, command }) => match engine.push_command(command) {
            Ok(tick) => WireMessage::Ack { id, tick },
            Err(e) => WireMessage::Error { message: e.to_string() },
        },
        Ok(_) => WireMessage::Error {
            message: "only command messages are accepted".into(),
        },
        Err(e) => WireMessage::Error {
            message: format!("malformed message: {e}"),
        },
    }
}

fn session(engine: &mut Engine, stream: TcpStream, options: &ServeOptions) -> Result<()> {
    stream.set_nodelay(true)?;
    let mut ws = tungstenite::accept(stream).context("websocket handshake")?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(2)))?;

    let rate = engine.config().tick_rate_hz;
    let every = ((rate / options.snapshot_hz).round() as u64).max(1);
    if let Some(s) = engine.snapshot() {
        send(&mut ws, &WireMessage::Snapshot(s))?;
    }
    let start = Instant::now();
    let start_tick = engine.tick();
    loop {
        loop {
            match ws.read() {
                Ok(Message::Text(text)) => {
                    let reply = handle_text(engine, text.as_str());
                    send(&mut ws, &reply)?;
                }
                Ok(Message::Close(_)) => return Ok(()),
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) =>
                {
                    break
                }
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
                Err(e) => return Err(e.into()),
            }
        }
        let due = start_tick + (start.elapsed().as_secs_f64() * rate) as u64;
        while engine.tick() < due {
            let row = engine.step();
            if row.tick.is_multiple_of(every) {
                let snap = engine.snapshot().expect("a tick has run");
                send(&mut ws, &WireMessage::Snapshot(snap))?;
            }
        }
        thread::sleep(Duration::from_millis(1));
    }
}
