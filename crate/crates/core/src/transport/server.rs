//! One replica: answers queries from its copy of the database using
//! session-scoped shared randomness. Servers never talk to each other.

use std::io::BufReader;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use log::{debug, info, warn};

use super::wire::{ErrorCode, MessageType, WireMessage};
use crate::error::{Error, Result};
use crate::protocol::{Database, SchemeConfig, Seed, ServerQuery, ServerSharedRandomness, SessionId, Variant};
use crate::schemes::answer;

/// Payload of a hello reply: `[q, R, d, M, L, variant id, d_min]`.
pub fn hello_payload(config: &SchemeConfig) -> Vec<u64> {
    vec![
        config.q(),
        config.r,
        config.d as u64,
        config.m as u64,
        config.l,
        config.variant().id() as u64,
        config.d_min,
    ]
}

/// What a server saw, without payload contents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub session: SessionId,
    pub kind: MessageType,
    pub symbols: usize,
}

pub struct ServerState {
    config: SchemeConfig,
    db: Database,
    seed: Seed,
    /// 1-based position, selecting the evaluation point `α_index`.
    index: usize,
    transcript: Mutex<Vec<TranscriptEntry>>,
}

impl ServerState {
    pub fn new(config: SchemeConfig, db: Database, seed: Seed, index: usize) -> Result<Self> {
        config.validate()?;
        db.check_matches(&config)?;
        if index == 0 || index > config.servers() {
            return Err(Error::InvalidConfig(format!(
                "server index {index} outside 1..={}",
                config.servers()
            )));
        }
        Ok(ServerState {
            config,
            db,
            seed,
            index,
            transcript: Mutex::new(Vec::new()),
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Message kinds and sizes received so far.
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.transcript.lock().expect("transcript lock").clone()
    }

    /// The reply to one well-formed frame.
    pub fn handle(&self, msg: &WireMessage) -> WireMessage {
        self.transcript.lock().expect("transcript lock").push(TranscriptEntry {
            session: msg.session,
            kind: msg.kind,
            symbols: msg.payload.len(),
        });
        let own = self.config.variant().id();
        let err = |code| WireMessage::error(msg.session, msg.scheme_id, code);
        if Variant::from_id(msg.scheme_id).is_none() {
            return err(ErrorCode::UnknownScheme);
        }
        if msg.scheme_id != own {
            return err(ErrorCode::SchemeMismatch);
        }
        match msg.kind {
            MessageType::Hello => {
                WireMessage::new(MessageType::Hello, msg.session, own, hello_payload(&self.config))
            }
            MessageType::Query => match self.answer(msg) {
                Ok(a) => WireMessage::new(MessageType::Answer, msg.session, own, a),
                Err(e) => {
                    debug!("server {}: rejected query: {e}", self.index);
                    err(ErrorCode::BadQuery)
                }
            },
            MessageType::Answer | MessageType::Error => err(ErrorCode::Malformed),
        }
    }

    fn answer(&self, msg: &WireMessage) -> Result<Vec<u64>> {
        let q = self.config.q();
        if msg.payload.iter().any(|&v| v >= q) {
            return Err(Error::Malformed("query element outside the field".into()));
        }
        let query = ServerQuery::from_symbols(&msg.payload, &self.config)?;
        let shared = ServerSharedRandomness::expand(&self.seed, &msg.session, &self.config);
        answer(&self.db, &query, &shared, self.index, &self.config)
    }

    /// Serves one connection until the peer closes it or sends a malformed
    /// frame, which is answered with an error frame before closing.
    pub fn serve_connection(&self, stream: TcpStream) -> Result<()> {
        let peer = stream.peer_addr().ok();
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = stream;
        loop {
            let msg = match WireMessage::read_from(&mut reader) {
                Ok(m) => m,
                Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(()),
                Err(Error::Malformed(why)) => {
                    warn!("server {}: malformed frame from {peer:?}: {why}", self.index);
                    WireMessage::error([0; 16], 0, ErrorCode::Malformed).write_to(&mut writer)?;
                    return Ok(());
                }
                Err(e) => return Err(e),
            };
            info!(
                "server {}: {:?} frame, {} symbols",
                self.index,
                msg.kind,
                msg.payload.len()
            );
            let reply = self.handle(&msg);
            info!(
                "server {}: replying {:?}, {} symbols",
                self.index,
                reply.kind,
                reply.payload.len()
            );
            reply.write_to(&mut writer)?;
        }
    }
}

/// A running listener; dropping it stops accepting new connections.
pub struct ServerHandle {
    addr: SocketAddr,
    state: Arc<ServerState>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn state(&self) -> &ServerState {
        &self.state
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    /// Blocks until the listener exits.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_now();
        }
    }
}

/// Binds `addr` (port 0 picks a free port) and serves each connection on its
/// own thread.
pub fn spawn(addr: &str, state: ServerState) -> Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let state = Arc::new(state);
    let stop = Arc::new(AtomicBool::new(false));
    let thread = {
        let state = Arc::clone(&state);
        let stop = Arc::clone(&stop);
        std::thread::spawn(move || {
            for conn in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                match conn {
                    Ok(stream) => {
                        let state = Arc::clone(&state);
                        std::thread::spawn(move || {
                            if let Err(e) = state.serve_connection(stream) {
                                warn!("server {}: connection ended: {e}", state.index);
                            }
                        });
                    }
                    Err(e) => warn!("accept failed: {e}"),
                }
            }
        })
    };
    info!("server {} listening on {addr}", state.index);
    Ok(ServerHandle {
        addr,
        state,
        stop,
        thread: Some(thread),
    })
}
