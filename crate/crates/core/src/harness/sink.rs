//! Observation hooks into a running simulation.
//!
//! Tests hang oracles off these callbacks (flat-memory data checks,
//! per-period access sets, pair-rate windows) without touching engine
//! internals, and without perturbing the run: sinks are observation-only.

use crate::memmodel::{LineData, MemRequest};
use crate::remap::MigrationPair;

/// Who executed a migration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MigrationInitiator {
    /// The device's migration unit (remap-table swap).
    Device,
    /// A host baseline policy (CPU copy + placement-table update).
    Policy,
}

/// All methods default to no-ops; implement what the oracle needs.
/// Addresses are post-relocation: `hpa` is the host-visible address the
/// engine routed, `dpa` the device address it resolved to.
#[allow(unused_variables)]
pub trait EventSink {
    /// A host request entered the memory path this cycle. For reads,
    /// `read_data` is the value the device will return (captured at the
    /// request's serialization point); for writes it is None and the
    /// request carries its payload.
    fn request_forwarded(
        &mut self,
        seq: u64,
        req: &MemRequest,
        hpa: u64,
        dpa: u64,
        read_data: Option<&LineData>,
        now: u64,
    ) {
    }

    /// A read response left the device (passed bandwidth accounting).
    fn response_released(&mut self, dpa: u64, submit_cycle: u64, release_cycle: u64) {}

    /// The profiler classified a fast page cold for `period`.
    fn cold_emitted(&mut self, dpa_page: u64, period: u64, now: u64) {}

    /// The profiler emitted a migration pair.
    fn pair_emitted(&mut self, pair: MigrationPair, now: u64) {}

    /// The hot detector crossed threshold for a slow page.
    fn hot_detected(&mut self, dpa_page: u64, now: u64) {}

    /// A migration finished and placement switched over.
    fn migration_committed(&mut self, pair: MigrationPair, initiator: MigrationInitiator, now: u64) {
    }

    /// The cold-detection bitmap swapped halves; recording now fills
    /// `new_period`, and scanning consumes `new_period - 1`. Fired before
    /// any of this cycle's accesses are observed.
    fn bitmap_period_switched(&mut self, new_period: u64, now: u64) {}
}

/// Discards everything.
pub struct NopSink;

impl EventSink for NopSink {}
