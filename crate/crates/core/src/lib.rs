//! Cycle-level simulator for tiered-memory devices.
//!
//! The crate is organized around a small set of hardware-shaped components:
//!
//! * [`memmodel`] - flat byte-addressable memory, page/cacheline arithmetic,
//!   and the reference oracle used by integrity tests.
//! * [`emucore`] - the discrete-event engine plus per-region latency and
//!   bandwidth emulation (timestamp counter, release-tag FIFOs, bandwidth
//!   budget counters).
//! * [`remap`] - host-to-device page remapping: translation tables, the
//!   set-associative remapping cache, and migration transactions.
//! * [`profiler`] - hot/cold page detection: count-min sketch with hot bits,
//!   ping-pong cold bitmaps, cold-page buffer, and pair rate limiting.
//! * [`migrate`] - the device-side migration unit (swap jobs, cacheline
//!   staging schedule, byte-rate budget).
//! * [`policies`] - host-software baseline policies (access-bit scanning,
//!   sampled promotion) driving CPU-copy migrations over a placement map.
//! * [`workloads`] - synthetic request generators and the binary trace
//!   format.
//! * [`harness`] - configuration, the end-to-end simulation loop, metrics,
//!   and report emission.

pub mod emucore;
pub mod harness;
pub mod memmodel;
pub mod migrate;
pub mod policies;
pub mod profiler;
pub mod remap;
pub mod workloads;

pub use emucore::{EmuError, EmuState, RegionConfig, RegionId, Tier};
pub use harness::{run_sim, run_sim_with_sink, ConfigError, ResolvedConfig, SimError, SimMetrics};
pub use memmodel::{BackingStore, HostAddr, LineData, MemError, MemRequest, Op, PageIndex};
pub use remap::{MigrationPair, RemapError};
pub use workloads::{WorkloadKind, WorkloadSpec};
