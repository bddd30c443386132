//! Byte-frame transports. Both carry the same frames; only the medium differs.

use std::io;
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::wire::{decode_frame, encode_frame, read_frame, write_frame};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    InProcess,
    Tcp,
}

impl std::str::FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inproc" | "in_process" => Ok(Self::InProcess),
            "tcp" => Ok(Self::Tcp),
            other => Err(format!("unknown transport {other:?} (expected inproc or tcp)")),
        }
    }
}

/// One end of a connection that moves whole payloads.
pub trait Transport: Send {
    fn send(&mut self, payload: &[u8]) -> io::Result<()>;
    /// Blocks for the next payload; `None` waits forever.
    fn recv(&mut self, timeout: Option<Duration>) -> io::Result<Vec<u8>>;
}

/// In-process transport: encoded frames over a pair of channels.
pub struct ChannelTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl ChannelTransport {
    pub fn pair() -> (Self, Self) {
        let (a_tx, b_rx) = mpsc::channel();
        let (b_tx, a_rx) = mpsc::channel();
        (Self { tx: a_tx, rx: a_rx }, Self { tx: b_tx, rx: b_rx })
    }
}

fn closed() -> io::Error {
    io::Error::new(io::ErrorKind::UnexpectedEof, "peer closed the connection")
}

impl Transport for ChannelTransport {
    fn send(&mut self, payload: &[u8]) -> io::Result<()> {
        self.tx.send(encode_frame(payload)).map_err(|_| closed())
    }

    fn recv(&mut self, timeout: Option<Duration>) -> io::Result<Vec<u8>> {
        let frame = match timeout {
            None => self.rx.recv().map_err(|_| closed())?,
            Some(t) => self.rx.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => io::Error::new(io::ErrorKind::TimedOut, "timed out"),
                RecvTimeoutError::Disconnected => closed(),
            })?,
        };
        Ok(decode_frame(&frame)?.to_vec())
    }
}

pub struct TcpTransport {
    stream: TcpStream,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        Ok(Self { stream })
    }

    pub fn connect(addr: &str) -> io::Result<Self> {
        Self::new(TcpStream::connect(addr)?)
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, payload: &[u8]) -> io::Result<()> {
        write_frame(&mut self.stream, payload)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> io::Result<Vec<u8>> {
        self.stream.set_read_timeout(timeout)?;
        read_frame(&mut self.stream).map_err(|e| match e.kind() {
            io::ErrorKind::WouldBlock => io::Error::new(io::ErrorKind::TimedOut, "timed out"),
            _ => e,
        })
    }
}
