//! Retrieval over the network: one connection per server, each receiving
//! only its own query.

use std::io::BufReader;
use std::net::TcpStream;
use std::time::Duration;

use log::info;
use rand::RngCore;

use super::server::hello_payload;
use super::wire::{MessageType, WireMessage};
use crate::error::{Error, Result};
use crate::protocol::{AnswerBundle, Cost, RetrievalResult, SchemeConfig, SessionId, UserInput};
use crate::schemes::ClientSession;

#[derive(Clone, Debug)]
pub struct Client {
    pub config: SchemeConfig,
    /// Server addresses, in evaluation-point order.
    pub servers: Vec<String>,
    pub timeout: Option<Duration>,
}

fn exchange(stream: &mut TcpStream, reader: &mut BufReader<TcpStream>, msg: &WireMessage) -> Result<WireMessage> {
    msg.write_to(stream)?;
    let reply = WireMessage::read_from(reader)?;
    if reply.kind == MessageType::Error {
        return Err(Error::Remote(reply.payload.first().copied().unwrap_or(0)));
    }
    if reply.session != msg.session {
        return Err(Error::Malformed("reply carries a different session id".into()));
    }
    Ok(reply)
}

impl Client {
    pub fn new(config: SchemeConfig, servers: Vec<String>) -> Result<Self> {
        config.validate()?;
        if servers.len() != config.servers() {
            return Err(Error::InvalidConfig(format!(
                "{} needs {} servers, got {}",
                config.variant(),
                config.servers(),
                servers.len()
            )));
        }
        Ok(Client {
            config,
            servers,
            timeout: Some(Duration::from_secs(30)),
        })
    }

    fn connect(&self, addr: &str) -> Result<(TcpStream, BufReader<TcpStream>)> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(self.timeout)?;
        stream.set_write_timeout(self.timeout)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok((stream, reader))
    }

    /// Handshake with one server; fails unless it echoes this client's
    /// parameters.
    pub fn hello(&self, server: usize) -> Result<Vec<u64>> {
        let (mut stream, mut reader) = self.connect(&self.servers[server])?;
        self.hello_on(&mut stream, &mut reader, [0; 16])
    }

    fn hello_on(&self, stream: &mut TcpStream, reader: &mut BufReader<TcpStream>, session: SessionId) -> Result<Vec<u64>> {
        let id = self.config.variant().id();
        let reply = exchange(stream, reader, &WireMessage::new(MessageType::Hello, session, id, Vec::new()))?;
        if reply.kind != MessageType::Hello {
            return Err(Error::Malformed(format!("expected hello, got {:?}", reply.kind)));
        }
        if reply.payload != hello_payload(&self.config) {
            return Err(Error::InvalidConfig(format!(
                "server parameters {:?} differ from ours {:?}",
                reply.payload,
                hello_payload(&self.config)
            )));
        }
        Ok(reply.payload)
    }

    /// Runs one session with a fresh session id. Input is validated before
    /// any connection is made; any server error aborts the whole session.
    pub fn retrieve<R: RngCore + ?Sized>(&self, input: &UserInput, rng: &mut R) -> Result<RetrievalResult> {
        let mut session_id = [0u8; 16];
        rng.fill_bytes(&mut session_id);
        let mut session = ClientSession::new(self.config.clone(), input.clone(), rng)?;
        let queries = session.queries()?;
        let id = self.config.variant().id();
        let q = self.config.q();
        let expected = self.config.answer_len();

        let results: Vec<Result<(Vec<u64>, usize)>> = std::thread::scope(|s| {
            let handles: Vec<_> = self
                .servers
                .iter()
                .zip(&queries.per_server)
                .map(|(addr, query)| {
                    s.spawn(move || -> Result<(Vec<u64>, usize)> {
                        let (mut stream, mut reader) = self.connect(addr)?;
                        self.hello_on(&mut stream, &mut reader, session_id)?;
                        let symbols = query.to_symbols();
                        let sent = symbols.len();
                        let msg = WireMessage::new(MessageType::Query, session_id, id, symbols);
                        let reply = exchange(&mut stream, &mut reader, &msg)?;
                        if reply.kind != MessageType::Answer || reply.scheme_id != id {
                            return Err(Error::Malformed(format!(
                                "expected an answer for scheme {id}, got {:?} for {}",
                                reply.kind, reply.scheme_id
                            )));
                        }
                        if reply.payload.len() != expected {
                            return Err(Error::DimensionMismatch {
                                expected,
                                got: reply.payload.len(),
                            });
                        }
                        if reply.payload.iter().any(|&v| v >= q) {
                            return Err(Error::Malformed("answer element outside the field".into()));
                        }
                        Ok((reply.payload, sent))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Malformed("server thread panicked".into()))))
                .collect()
        });

        let mut per_server = Vec::with_capacity(results.len());
        let mut cost = Cost::default();
        for r in results {
            let (answer, sent) = r?;
            cost.upload += sent as u64;
            cost.download += answer.len() as u64;
            per_server.push(answer);
        }
        let mut result = session.decode(&AnswerBundle { per_server })?;
        result.cost = cost;
        info!(
            "session {}: upload {} symbols, download {} symbols",
            hex::encode(session_id),
            cost.upload,
            cost.download
        );
        Ok(result)
    }
}
