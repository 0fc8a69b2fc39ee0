//! Flat memory model: addresses, requests, and the sparse backing store.
//!
//! Everything above this module speaks in terms of 4 KiB pages and request
//! payloads of at most one 64 B cacheline. The store is sparse: pages that
//! were never written read back as zeroes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bytes per page.
pub const PAGE_SIZE: u64 = 4096;
/// Bytes per cacheline; also the maximum request size.
pub const CACHELINE_SIZE: u64 = 64;
/// Cachelines per page.
pub const LINES_PER_PAGE: u64 = PAGE_SIZE / CACHELINE_SIZE;

/// Zero-based 4 KiB page number.
pub type PageIndex = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MemError {
    #[error("access at {addr:#x}+{len} exceeds capacity of {capacity_bytes:#x} bytes")]
    OutOfRange { addr: u64, len: u64, capacity_bytes: u64 },
}

/// Host-visible physical address (what requests carry).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HostAddr(pub u64);

/// Device-internal physical address (post-remap).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceAddr(pub u64);

impl HostAddr {
    pub fn from_page(page: PageIndex) -> Self {
        HostAddr(page * PAGE_SIZE)
    }
    pub fn page(self) -> PageIndex {
        self.0 / PAGE_SIZE
    }
    pub fn page_offset(self) -> u64 {
        self.0 % PAGE_SIZE
    }
}

impl DeviceAddr {
    pub fn from_page(page: PageIndex) -> Self {
        DeviceAddr(page * PAGE_SIZE)
    }
    pub fn page(self) -> PageIndex {
        self.0 / PAGE_SIZE
    }
    pub fn page_offset(self) -> u64 {
        self.0 % PAGE_SIZE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Read,
    Write,
}

/// Up to one cacheline of request or response data.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct LineData {
    len: u8,
    bytes: [u8; CACHELINE_SIZE as usize],
}

impl LineData {
    pub fn new(data: &[u8]) -> Self {
        assert!(
            !data.is_empty() && data.len() <= CACHELINE_SIZE as usize,
            "line data must be 1..=64 bytes, got {}",
            data.len()
        );
        let mut bytes = [0u8; CACHELINE_SIZE as usize];
        bytes[..data.len()].copy_from_slice(data);
        LineData { len: data.len() as u8, bytes }
    }

    pub fn zeroed(len: u8) -> Self {
        assert!(len >= 1 && len as u64 <= CACHELINE_SIZE);
        LineData { len, bytes: [0u8; CACHELINE_SIZE as usize] }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bytes[..self.len as usize]
    }
}

impl std::fmt::Debug for LineData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LineData[{}] ", self.len)?;
        for b in self.as_slice().iter().take(8) {
            write!(f, "{b:02x}")?;
        }
        if self.len > 8 {
            write!(f, "..")?;
        }
        Ok(())
    }
}

/// One host memory request.
///
/// Invariants: `1 <= size <= 64`; writes carry a payload of exactly `size`
/// bytes; reads carry none.
#[derive(Clone, Debug, PartialEq)]
pub struct MemRequest {
    pub op: Op,
    pub addr: HostAddr,
    pub size: u8,
    pub payload: Option<LineData>,
    pub issue_cycle: u64,
}

impl MemRequest {
    pub fn read(addr: HostAddr, size: u8, issue_cycle: u64) -> Self {
        MemRequest { op: Op::Read, addr, size, payload: None, issue_cycle }
    }

    pub fn write(addr: HostAddr, data: LineData, issue_cycle: u64) -> Self {
        MemRequest { op: Op::Write, addr, size: data.len() as u8, payload: Some(data), issue_cycle }
    }

    /// Checks the structural invariants; used by ingestion paths.
    pub fn check(&self) -> Result<(), String> {
        if self.size == 0 || self.size as u64 > CACHELINE_SIZE {
            return Err(format!("request size {} outside 1..=64", self.size));
        }
        match (self.op, &self.payload) {
            (Op::Write, Some(p)) if p.len() == self.size as usize => Ok(()),
            (Op::Write, _) => Err("write without matching payload".to_owned()),
            (Op::Read, None) => Ok(()),
            (Op::Read, Some(_)) => Err("read carrying a payload".to_owned()),
        }
    }
}

type Page = [u8; PAGE_SIZE as usize];

/// Sparse page-granular byte store. Absent pages read as zeroes.
pub struct BackingStore {
    capacity_pages: u64,
    pages: HashMap<PageIndex, Box<Page>>,
}

impl BackingStore {
    pub fn new(capacity_pages: u64) -> Self {
        BackingStore { capacity_pages, pages: HashMap::new() }
    }

    pub fn capacity_pages(&self) -> u64 {
        self.capacity_pages
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_pages * PAGE_SIZE
    }

    /// Number of pages that have been materialized by writes.
    pub fn resident_pages(&self) -> usize {
        self.pages.len()
    }

    fn bounds_check(&self, addr: u64, len: u64) -> Result<(), MemError> {
        let end = addr.checked_add(len);
        match end {
            Some(e) if e <= self.capacity_bytes() => Ok(()),
            _ => Err(MemError::OutOfRange { addr, len, capacity_bytes: self.capacity_bytes() }),
        }
    }

    /// Reads `buf.len()` bytes starting at `addr`. Spans pages if needed.
    pub fn read(&self, addr: u64, buf: &mut [u8]) -> Result<(), MemError> {
        self.bounds_check(addr, buf.len() as u64)?;
        let mut pos = 0usize;
        while pos < buf.len() {
            let a = addr + pos as u64;
            let page = a / PAGE_SIZE;
            let off = (a % PAGE_SIZE) as usize;
            let n = ((PAGE_SIZE as usize - off).min(buf.len() - pos)) as usize;
            match self.pages.get(&page) {
                Some(p) => buf[pos..pos + n].copy_from_slice(&p[off..off + n]),
                None => buf[pos..pos + n].fill(0),
            }
            pos += n;
        }
        Ok(())
    }

    /// Writes `data` starting at `addr`. Spans pages if needed.
    pub fn write(&mut self, addr: u64, data: &[u8]) -> Result<(), MemError> {
        self.bounds_check(addr, data.len() as u64)?;
        let mut pos = 0usize;
        while pos < data.len() {
            let a = addr + pos as u64;
            let page = a / PAGE_SIZE;
            let off = (a % PAGE_SIZE) as usize;
            let n = ((PAGE_SIZE as usize - off).min(data.len() - pos)) as usize;
            let p = self.pages.entry(page).or_insert_with(|| Box::new([0u8; PAGE_SIZE as usize]));
            p[off..off + n].copy_from_slice(&data[pos..pos + n]);
            pos += n;
        }
        Ok(())
    }

    pub fn read_line(&self, addr: u64, size: u8) -> Result<LineData, MemError> {
        let mut out = LineData::zeroed(size);
        self.read(addr, &mut out.bytes[..size as usize])?;
        Ok(out)
    }

    /// Returns a copy of a whole page (zeroes if never written).
    pub fn read_page(&self, page: PageIndex) -> Result<Box<Page>, MemError> {
        self.bounds_check(page * PAGE_SIZE, PAGE_SIZE)?;
        Ok(match self.pages.get(&page) {
            Some(p) => p.clone(),
            None => Box::new([0u8; PAGE_SIZE as usize]),
        })
    }

    pub fn write_page(&mut self, page: PageIndex, data: &Page) -> Result<(), MemError> {
        self.bounds_check(page * PAGE_SIZE, PAGE_SIZE)?;
        self.pages.insert(page, Box::new(*data));
        Ok(())
    }

    /// Swaps the contents of two pages. Used by migration commits.
    pub fn swap_pages(&mut self, a: PageIndex, b: PageIndex) -> Result<(), MemError> {
        self.bounds_check(a * PAGE_SIZE, PAGE_SIZE)?;
        self.bounds_check(b * PAGE_SIZE, PAGE_SIZE)?;
        if a == b {
            return Ok(());
        }
        let pa = self.pages.remove(&a);
        let pb = self.pages.remove(&b);
        if let Some(p) = pa {
            self.pages.insert(b, p);
        }
        if let Some(p) = pb {
            self.pages.insert(a, p);
        }
        Ok(())
    }
}

/// Applies a request to a flat store, treating the host address as a flat
/// byte offset. This is the reference against which the full device pipeline
/// is checked: any sequence of requests must produce identical read results.
pub fn oracle_apply(store: &mut BackingStore, req: &MemRequest) -> Result<Option<LineData>, MemError> {
    match req.op {
        Op::Read => Ok(Some(store.read_line(req.addr.0, req.size)?)),
        Op::Write => {
            let payload = req.payload.as_ref().expect("write request without payload");
            store.write(req.addr.0, payload.as_slice())?;
            Ok(None)
        }
    }
}
