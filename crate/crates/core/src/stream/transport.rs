//! Byte-stream transports: an in-process pipe, TCP with connect retries,
//! and plain files for recorded streams.

use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::time::Duration;

use crossbeam_channel::{Receiver, Sender};
use serde::{Deserialize, Serialize};

/// Where encoded frames go.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Endpoint {
    /// In-process pipe to a receiver in the same run.
    #[default]
    Loopback,
    Tcp {
        address: String,
        #[serde(default = "default_retries")]
        connect_retries: u32,
        #[serde(default = "default_backoff_ms")]
        retry_backoff_ms: u64,
    },
    /// Records the stream to a file, replacing any existing one.
    File { path: PathBuf },
}

fn default_retries() -> u32 {
    5
}

fn default_backoff_ms() -> u64 {
    200
}

/// Writing half of [`pipe`]. Dropping it ends the stream.
#[derive(Debug)]
pub struct PipeWriter {
    tx: Sender<Vec<u8>>,
}

/// Reading half of [`pipe`].
#[derive(Debug)]
pub struct PipeReader {
    rx: Receiver<Vec<u8>>,
    chunk: Vec<u8>,
    pos: usize,
}

/// Unbounded in-memory byte pipe.
pub fn pipe() -> (PipeWriter, PipeReader) {
    let (tx, rx) = crossbeam_channel::unbounded();
    (
        PipeWriter { tx },
        PipeReader {
            rx,
            chunk: Vec::new(),
            pos: 0,
        },
    )
}

impl Write for PipeWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        if buf.is_empty() {
            return Ok(0);
        }
        self.tx
            .send(buf.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "pipe reader dropped"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        while self.pos == self.chunk.len() {
            match self.rx.recv() {
                Ok(c) => {
                    self.chunk = c;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.chunk.len() - self.pos);
        out[..n].copy_from_slice(&self.chunk[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

/// Connects, retrying `retries` times with doubling backoff starting at
/// `backoff_ms`.
pub fn connect_with_retry(address: &str, retries: u32, backoff_ms: u64) -> io::Result<TcpStream> {
    let mut delay = backoff_ms;
    let mut attempt = 0;
    loop {
        match TcpStream::connect(address) {
            Ok(s) => {
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(e) if attempt >= retries => return Err(e),
            Err(e) => {
                log::warn!("connect to {address} failed ({e}); retrying in {delay} ms");
                std::thread::sleep(Duration::from_millis(delay));
                delay = (delay * 2).min(10_000);
                attempt += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipe_carries_bytes_and_closes() {
        let (mut w, mut r) = pipe();
        let t = std::thread::spawn(move || {
            w.write_all(b"hello ").unwrap();
            w.write_all(b"world").unwrap();
        });
        let mut s = String::new();
        r.read_to_string(&mut s).unwrap();
        t.join().unwrap();
        assert_eq!(s, "hello world");
    }

    #[test]
    fn refused_connection_gives_up() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        drop(listener);
        assert!(connect_with_retry(&addr, 1, 1).is_err());
    }
}
