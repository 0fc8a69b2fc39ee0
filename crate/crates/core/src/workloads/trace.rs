//! Binary request-trace files.
//!
//! Layout: 4 magic bytes `HTRC`, one version byte (1), then records until
//! EOF. Each record is `delta_cycles` (unsigned LEB128 varint), an op byte
//! (0 = read, 1 = write), the host physical address as a little-endian
//! u64, and a size byte in 1..=64. Deltas accumulate into absolute issue
//! cycles, so records must be written in non-decreasing time order.
//!
//! Traces carry no write payloads; readers synthesize them from the record
//! index and address (see [`super::synth_payload`]), which makes a
//! generate -> write -> read round trip reproduce the stream exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::memmodel::{HostAddr, MemRequest, Op, CACHELINE_SIZE};
use crate::workloads::{synth_payload, RequestSource};

pub const TRACE_MAGIC: [u8; 4] = *b"HTRC";
pub const TRACE_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// `offset` is the byte position where the malformed or incomplete
    /// field starts.
    #[error("trace format error at byte {offset}: {what}")]
    Format { offset: u64, what: String },
    #[error("trace records must be time-ordered: cycle {current} after {previous}")]
    TimeOrder { previous: u64, current: u64 },
}

impl TraceError {
    fn format(offset: u64, what: impl Into<String>) -> Self {
        TraceError::Format { offset, what: what.into() }
    }
}

/// Streaming trace writer. The header goes out on construction; call
/// [`TraceWriter::finish`] to flush.
pub struct TraceWriter<W: Write> {
    w: W,
    prev_cycle: u64,
    records: u64,
}

impl TraceWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        TraceWriter::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut w: W) -> Result<Self, TraceError> {
        w.write_all(&TRACE_MAGIC)?;
        w.write_all(&[TRACE_VERSION])?;
        Ok(TraceWriter { w, prev_cycle: 0, records: 0 })
    }

    pub fn push(&mut self, req: &MemRequest) -> Result<(), TraceError> {
        if req.issue_cycle < self.prev_cycle {
            return Err(TraceError::TimeOrder {
                previous: self.prev_cycle,
                current: req.issue_cycle,
            });
        }
        let delta = req.issue_cycle - self.prev_cycle;
        self.prev_cycle = req.issue_cycle;

        let mut varint = [0u8; 10];
        let n = encode_varint(delta, &mut varint);
        self.w.write_all(&varint[..n])?;
        self.w.write_all(&[match req.op {
            Op::Read => 0,
            Op::Write => 1,
        }])?;
        self.w.write_all(&req.addr.0.to_le_bytes())?;
        self.w.write_all(&[req.size])?;
        self.records += 1;
        Ok(())
    }

    pub fn records_written(&self) -> u64 {
        self.records
    }

    pub fn finish(mut self) -> Result<(), TraceError> {
        self.w.flush()?;
        Ok(())
    }
}

fn encode_varint(mut v: u64, out: &mut [u8; 10]) -> usize {
    let mut i = 0;
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out[i] = byte;
            return i + 1;
        }
        out[i] = byte | 0x80;
        i += 1;
    }
}

/// Streaming trace reader; yields requests with absolute issue cycles.
pub struct TraceReader<R: Read> {
    r: R,
    offset: u64,
    cur_cycle: u64,
    seq: u64,
}

impl TraceReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        TraceReader::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> TraceReader<R> {
    pub fn new(mut r: R) -> Result<Self, TraceError> {
        let mut magic = [0u8; 4];
        read_exact_at(&mut r, &mut magic, 0, "header magic")?;
        if magic != TRACE_MAGIC {
            return Err(TraceError::format(0, format!("bad magic {magic:02x?}, want \"HTRC\"")));
        }
        let mut ver = [0u8; 1];
        read_exact_at(&mut r, &mut ver, 4, "header version")?;
        if ver[0] != TRACE_VERSION {
            return Err(TraceError::format(
                4,
                format!("unsupported version {}, want {TRACE_VERSION}", ver[0]),
            ));
        }
        Ok(TraceReader { r, offset: 5, cur_cycle: 0, seq: 0 })
    }

    /// Current byte offset into the stream (next unread byte).
    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Next record, or Ok(None) at a clean end-of-file (a record boundary).
    pub fn next_record(&mut self) -> Result<Option<MemRequest>, TraceError> {
        let record_start = self.offset;
        let delta = match self.read_varint()? {
            Some(d) => d,
            None => return Ok(None),
        };

        let op_off = self.offset;
        let mut byte = [0u8; 1];
        read_exact_at(&mut self.r, &mut byte, op_off, "op byte")?;
        self.offset += 1;
        let op = match byte[0] {
            0 => Op::Read,
            1 => Op::Write,
            other => {
                return Err(TraceError::format(op_off, format!("invalid op byte {other}")))
            }
        };

        let addr_off = self.offset;
        let mut addr_bytes = [0u8; 8];
        read_exact_at(&mut self.r, &mut addr_bytes, addr_off, "address field")?;
        self.offset += 8;
        let addr = u64::from_le_bytes(addr_bytes);

        let size_off = self.offset;
        read_exact_at(&mut self.r, &mut byte, size_off, "size byte")?;
        self.offset += 1;
        let size = byte[0];
        if size == 0 || size as u64 > CACHELINE_SIZE {
            return Err(TraceError::format(
                size_off,
                format!("size {size} outside 1..={CACHELINE_SIZE}"),
            ));
        }

        self.cur_cycle = self.cur_cycle.checked_add(delta).ok_or_else(|| {
            TraceError::format(record_start, "cumulative cycle overflows u64")
        })?;
        let seq = self.seq;
        self.seq += 1;

        Ok(Some(match op {
            Op::Read => MemRequest::read(HostAddr(addr), size, self.cur_cycle),
            Op::Write => MemRequest::write(
                HostAddr(addr),
                synth_payload(seq, addr, size),
                self.cur_cycle,
            ),
        }))
    }

    /// Reads a varint. None on clean EOF before the first byte.
    fn read_varint(&mut self) -> Result<Option<u64>, TraceError> {
        let field_start = self.offset;
        let mut value = 0u64;
        let mut shift = 0u32;
        let mut first = true;
        loop {
            let mut byte = [0u8; 1];
            match self.r.read(&mut byte)? {
                0 if first => return Ok(None),
                0 => {
                    return Err(TraceError::format(
                        field_start,
                        "truncated record: EOF inside delta varint",
                    ))
                }
                _ => {}
            }
            self.offset += 1;
            first = false;
            let b = byte[0];
            if shift >= 63 && b > 1 {
                return Err(TraceError::format(field_start, "delta varint overflows u64"));
            }
            value |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(Some(value));
            }
            shift += 7;
            if shift > 63 {
                return Err(TraceError::format(field_start, "delta varint longer than 10 bytes"));
            }
        }
    }
}

fn read_exact_at<R: Read>(
    r: &mut R,
    buf: &mut [u8],
    field_offset: u64,
    what: &str,
) -> Result<(), TraceError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => {
                return Err(TraceError::format(
                    field_offset,
                    format!("truncated record: EOF inside {what}"),
                ))
            }
            n => filled += n,
        }
    }
    Ok(())
}

impl<R: Read> RequestSource for TraceReader<R> {
    fn next_request(&mut self) -> Result<Option<MemRequest>, TraceError> {
        self.next_record()
    }
}
