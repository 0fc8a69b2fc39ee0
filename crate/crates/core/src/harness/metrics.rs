//! Run metrics: totals, per-region counters, a sampled timeseries, the
//! read-latency distribution, and migration/profiler/remap accounting.
//!
//! Everything here is plain serializable data. The engine feeds a
//! [`MetricsBuilder`] as it runs; [`MetricsBuilder::finalize`] computes the
//! derived values (ratios, percentiles) once at the end, so identical runs
//! produce identical metrics byte for byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::emucore::{RegionConfig, Tier};
use crate::memmodel::Op;
use crate::profiler::ProfilerStats;

use super::config::ResolvedConfig;

/// Bumped whenever the metrics JSON shape changes incompatibly.
pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Traffic counters for one emulated region. Host traffic and CPU-driven
/// migration copies are accounted separately; device-engine migration
/// transfers use a dedicated internal port and do not appear here.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct RegionCounters {
    pub region_id: u32,
    pub tier: Tier,
    pub reads: u64,
    pub writes: u64,
    /// Bytes moved by host requests.
    pub bytes: u64,
    /// 64 B line reads issued by CPU-copy migrations.
    pub migration_reads: u64,
    /// 64 B line writes posted by CPU-copy migrations.
    pub migration_writes: u64,
}

/// One sampling-interval row of the timeseries. Interval `i` covers cycles
/// `[i*sampling + 1, (i+1)*sampling]`; requests are binned by the cycle the
/// device forwarded them, migrations by their commit cycle.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IntervalSample {
    pub cycle_start: u64,
    pub requests: u64,
    pub slow_accesses: u64,
    pub slow_ratio: f64,
    pub migrations: u64,
}

/// Read latency summary over host reads (release cycle minus the cycle the
/// request entered the device). Percentiles use the nearest-rank rule.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LatencySummary {
    pub count: u64,
    pub mean: f64,
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
    pub min: u64,
    pub max: u64,
}

impl LatencySummary {
    fn empty() -> Self {
        LatencySummary { count: 0, mean: 0.0, p50: 0, p90: 0, p99: 0, min: 0, max: 0 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct MigrationSummary {
    /// Swaps committed by either path.
    pub swaps_committed: u64,
    pub device_swaps: u64,
    pub policy_swaps: u64,
    pub pages_moved: u64,
    pub bytes_moved: u64,
    pub budget_bytes_per_window: u64,
    pub budget_window_cycles: u64,
    /// Swap attempts deferred at least one cycle by an exhausted window.
    pub budget_deferrals: u64,
    pub max_bytes_in_window: u64,
    /// Migration candidates still queued when the run ended.
    pub pending_at_end: u64,
    /// Device pairs dropped because a queued or in-flight pair already
    /// covered one of the pages.
    pub stale_pairs_discarded: u64,
    /// Baseline promotions skipped because the page was already fast.
    pub skipped_already_fast: u64,
    /// Cycles the workload was stalled behind CPU-copy migrations.
    pub cpu_copy_stall_cycles: u64,
}

/// Remap path counters (device policy only; zero otherwise).
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct RemapMetrics {
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub hit_rate: f64,
    pub metadata_reads: u64,
    pub metadata_writes: u64,
}

/// Host-software baseline counters (PTE scan / sampling policies).
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct BaselineMetrics {
    pub scans_completed: u64,
    pub pages_walked: u64,
    /// Cycles the workload was stalled behind page-table walks.
    pub scan_stall_cycles: u64,
    pub samples_taken: u64,
    pub samples_dropped_full: u64,
    pub samples_dropped_duplicate: u64,
}

/// Complete result of one simulation run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SimMetrics {
    pub schema_version: u32,
    pub total_cycles: u64,
    pub host_requests: u64,
    pub host_reads: u64,
    pub host_writes: u64,
    /// Host accesses served from fast / slow regions.
    pub fast_accesses: u64,
    pub slow_accesses: u64,
    pub slow_access_ratio: f64,
    pub read_latency: LatencySummary,
    pub per_region: Vec<RegionCounters>,
    pub sampling_interval_cycles: u64,
    pub timeseries: Vec<IntervalSample>,
    pub migrations: MigrationSummary,
    pub profiler: ProfilerStats,
    pub remap: RemapMetrics,
    pub baseline: BaselineMetrics,
    /// The exact configuration the run used, defaults and derived layout
    /// included.
    pub effective_config: ResolvedConfig,
}

#[derive(Clone, Copy, Default)]
struct IntervalAcc {
    requests: u64,
    slow: u64,
    migrations: u64,
}

/// Incremental accumulator the engine drives; cheap per event.
pub struct MetricsBuilder {
    sampling: u64,
    host_requests: u64,
    host_reads: u64,
    host_writes: u64,
    fast_accesses: u64,
    slow_accesses: u64,
    region_order: Vec<u32>,
    per_region: BTreeMap<u32, RegionCounters>,
    hist: BTreeMap<u64, u64>,
    lat_sum: u128,
    lat_count: u64,
    intervals: Vec<IntervalAcc>,
}

impl MetricsBuilder {
    pub fn new(regions: &[RegionConfig], sampling_interval_cycles: u64) -> Self {
        assert!(sampling_interval_cycles > 0);
        let per_region = regions
            .iter()
            .map(|r| {
                (
                    r.id,
                    RegionCounters {
                        region_id: r.id,
                        tier: r.tier,
                        reads: 0,
                        writes: 0,
                        bytes: 0,
                        migration_reads: 0,
                        migration_writes: 0,
                    },
                )
            })
            .collect();
        MetricsBuilder {
            sampling: sampling_interval_cycles,
            host_requests: 0,
            host_reads: 0,
            host_writes: 0,
            fast_accesses: 0,
            slow_accesses: 0,
            region_order: regions.iter().map(|r| r.id).collect(),
            per_region,
            hist: BTreeMap::new(),
            lat_sum: 0,
            lat_count: 0,
            intervals: Vec::new(),
        }
    }

    /// Interval accumulator for an event at `cycle` (cycles are 1-based:
    /// the first simulated cycle is 1).
    fn interval_mut(&mut self, cycle: u64) -> &mut IntervalAcc {
        debug_assert!(cycle >= 1);
        let idx = ((cycle - 1) / self.sampling) as usize;
        if idx >= self.intervals.len() {
            self.intervals.resize(idx + 1, IntervalAcc::default());
        }
        &mut self.intervals[idx]
    }

    /// One host request forwarded to the media at `cycle`.
    pub fn record_host_access(&mut self, region_id: u32, tier: Tier, op: Op, bytes: u64, cycle: u64) {
        self.host_requests += 1;
        match tier {
            Tier::Fast => self.fast_accesses += 1,
            Tier::Slow => self.slow_accesses += 1,
        }
        let rc = self.per_region.get_mut(&region_id).expect("unknown region id");
        match op {
            Op::Read => {
                self.host_reads += 1;
                rc.reads += 1;
            }
            Op::Write => {
                self.host_writes += 1;
                rc.writes += 1;
            }
        }
        rc.bytes += bytes;
        let acc = self.interval_mut(cycle);
        acc.requests += 1;
        acc.slow += (tier == Tier::Slow) as u64;
    }

    /// One 64 B line moved by a CPU-copy migration through the host port.
    pub fn record_cpu_migration_line(&mut self, region_id: u32, op: Op) {
        let rc = self.per_region.get_mut(&region_id).expect("unknown region id");
        match op {
            Op::Read => rc.migration_reads += 1,
            Op::Write => rc.migration_writes += 1,
        }
    }

    /// A completed host read's observed latency.
    pub fn record_read_latency(&mut self, latency_cycles: u64) {
        *self.hist.entry(latency_cycles).or_insert(0) += 1;
        self.lat_sum += latency_cycles as u128;
        self.lat_count += 1;
    }

    /// A migration (either path) committed at `cycle`.
    pub fn record_migration_commit(&mut self, cycle: u64) {
        self.interval_mut(cycle).migrations += 1;
    }

    pub fn host_requests(&self) -> u64 {
        self.host_requests
    }

    /// Read-latency histogram as (latency, count), ascending.
    pub fn latency_histogram(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.hist.iter().map(|(&l, &c)| (l, c))
    }

    fn latency_summary(&self) -> LatencySummary {
        if self.lat_count == 0 {
            return LatencySummary::empty();
        }
        let pct = |q: f64| -> u64 {
            // Nearest rank: smallest latency whose cumulative count reaches
            // ceil(q * n).
            let rank = ((q * self.lat_count as f64).ceil() as u64).max(1);
            let mut cum = 0u64;
            for (&lat, &cnt) in &self.hist {
                cum += cnt;
                if cum >= rank {
                    return lat;
                }
            }
            *self.hist.keys().next_back().expect("nonempty histogram")
        };
        LatencySummary {
            count: self.lat_count,
            mean: self.lat_sum as f64 / self.lat_count as f64,
            p50: pct(0.50),
            p90: pct(0.90),
            p99: pct(0.99),
            min: *self.hist.keys().next().expect("nonempty histogram"),
            max: *self.hist.keys().next_back().expect("nonempty histogram"),
        }
    }

    /// Materializes the final metrics. `total_cycles` is the last simulated
    /// cycle; the timeseries always has `ceil(total_cycles / sampling)`
    /// entries, trailing idle intervals included.
    pub fn finalize(
        self,
        total_cycles: u64,
        migrations: MigrationSummary,
        profiler: ProfilerStats,
        remap: RemapMetrics,
        baseline: BaselineMetrics,
        effective_config: ResolvedConfig,
    ) -> SimMetrics {
        let n_intervals = total_cycles.div_ceil(self.sampling) as usize;
        debug_assert!(self.intervals.len() <= n_intervals, "event recorded past total_cycles");
        let timeseries: Vec<IntervalSample> = (0..n_intervals)
            .map(|i| {
                let acc = self.intervals.get(i).copied().unwrap_or_default();
                IntervalSample {
                    cycle_start: i as u64 * self.sampling + 1,
                    requests: acc.requests,
                    slow_accesses: acc.slow,
                    slow_ratio: ratio(acc.slow, acc.requests),
                    migrations: acc.migrations,
                }
            })
            .collect();
        let read_latency = self.latency_summary();
        SimMetrics {
            schema_version: METRICS_SCHEMA_VERSION,
            total_cycles,
            host_requests: self.host_requests,
            host_reads: self.host_reads,
            host_writes: self.host_writes,
            fast_accesses: self.fast_accesses,
            slow_accesses: self.slow_accesses,
            slow_access_ratio: ratio(self.slow_accesses, self.host_requests),
            read_latency,
            per_region: self
                .region_order
                .iter()
                .map(|id| self.per_region[id].clone())
                .collect(),
            sampling_interval_cycles: self.sampling,
            timeseries,
            migrations,
            profiler,
            remap,
            baseline,
            effective_config,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
