//! Length-prefixed framing over an ordered byte stream.
//!
//! Each record is `[u32 LE length][encoded frame]`. The reader checks the
//! length against the header before trusting it; on any framing error it
//! reports one error item and rescans for the next frame magic.

use std::io::{self, ErrorKind, Read, Write};

use crate::stream::codec::{decode_frame, DecodeError, FrameHeader, HEADER_LEN, MAGIC};
use crate::stream::frame::RgbdFrame;

pub const PREFIX_LEN: usize = 4;

pub fn write_record(sink: &mut impl Write, encoded: &[u8]) -> io::Result<()> {
    let len = u32::try_from(encoded.len()).map_err(|_| io::Error::new(ErrorKind::InvalidInput, "frame too large"))?;
    sink.write_all(&len.to_le_bytes())?;
    sink.write_all(encoded)
}

/// Iterator of decoded frames (or per-frame errors) read from `source`.
/// Ends when the source reaches end of stream.
pub struct FrameReader<R> {
    source: R,
    buf: Vec<u8>,
    pos: usize,
    eof: bool,
    done: bool,
    /// Bytes skipped while resynchronizing.
    pub skipped_bytes: u64,
}

pub fn receive_frames<R: Read>(source: R) -> FrameReader<R> {
    FrameReader::new(source)
}

impl<R: Read> FrameReader<R> {
    pub fn new(source: R) -> Self {
        Self {
            source,
            buf: Vec::new(),
            pos: 0,
            eof: false,
            done: false,
            skipped_bytes: 0,
        }
    }

    fn available(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Reads until `n` bytes are buffered past `pos` or the stream ends.
    fn fill(&mut self, n: usize) -> Result<bool, DecodeError> {
        let mut chunk = [0u8; 64 * 1024];
        while self.available() < n && !self.eof {
            match self.source.read(&mut chunk) {
                Ok(0) => self.eof = true,
                Ok(k) => self.buf.extend_from_slice(&chunk[..k]),
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => {
                    self.eof = true;
                    return Err(DecodeError::Transport(e.to_string()));
                }
            }
        }
        Ok(self.available() >= n)
    }

    /// Advances to the next `PSF1` magic at least `skip` bytes ahead, leaving
    /// `pos` on its length prefix. Drops everything if none is found.
    fn resync(&mut self, skip: usize) {
        let start = self.pos;
        let mut from = self.pos + skip.max(PREFIX_LEN);
        loop {
            if let Some(off) = self.buf[from.min(self.buf.len())..]
                .windows(MAGIC.len())
                .position(|w| w == MAGIC)
            {
                self.pos = from + off - PREFIX_LEN;
                break;
            }
            if self.eof {
                self.pos = self.buf.len();
                break;
            }
            // Keep the last few bytes in case the magic straddles reads.
            from = self.buf.len().saturating_sub(MAGIC.len() - 1).max(from);
            let want = self.buf.len() - self.pos + 64 * 1024;
            // Transport errors end the stream at the next call.
            let _ = self.fill(want);
        }
        self.skipped_bytes += (self.pos - start) as u64;
    }

    /// Next raw encoded frame (without its length prefix), or a framing
    /// error. Payloads are not checked.
    pub fn next_record(&mut self) -> Option<Result<Vec<u8>, DecodeError>> {
        if self.done {
            return None;
        }
        if self.pos > 0 && self.pos >= self.buf.len() / 2 {
            self.buf.drain(..self.pos);
            self.pos = 0;
        }
        match self.fill(PREFIX_LEN + HEADER_LEN) {
            Err(e) => {
                self.done = true;
                return Some(Err(e));
            }
            Ok(false) => {
                self.done = true;
                let left = self.available();
                return (left > 0).then_some(Err(DecodeError::Truncated {
                    needed: PREFIX_LEN + HEADER_LEN,
                    available: left,
                }));
            }
            Ok(true) => {}
        }
        let p = self.pos;
        let declared = u32::from_le_bytes(self.buf[p..p + 4].try_into().unwrap()) as usize;
        let header = match FrameHeader::parse(&self.buf[p + PREFIX_LEN..p + PREFIX_LEN + HEADER_LEN]) {
            Ok(h) => h,
            Err(e) => {
                self.resync(PREFIX_LEN + MAGIC.len());
                return Some(Err(e));
            }
        };
        if declared != header.total_len() {
            self.resync(PREFIX_LEN + MAGIC.len());
            return Some(Err(DecodeError::LengthMismatch {
                declared,
                expected: header.total_len(),
            }));
        }
        match self.fill(PREFIX_LEN + declared) {
            Err(e) => {
                self.done = true;
                return Some(Err(e));
            }
            Ok(false) => {
                self.done = true;
                return Some(Err(DecodeError::Truncated {
                    needed: PREFIX_LEN + declared,
                    available: self.available(),
                }));
            }
            Ok(true) => {}
        }
        let p = self.pos;
        let out = self.buf[p + PREFIX_LEN..p + PREFIX_LEN + declared].to_vec();
        self.pos += PREFIX_LEN + declared;
        Some(Ok(out))
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<RgbdFrame, DecodeError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().map(|r| r.and_then(|bytes| decode_frame(&bytes)))
    }
}
