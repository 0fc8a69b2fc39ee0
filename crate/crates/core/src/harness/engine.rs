//! The simulation engine: one cycle at a time, it moves host requests
//! through translation, the emulated media, and whichever placement policy
//! the config selects, collecting metrics along the way.
//!
//! Cycle anatomy (the order is part of the determinism contract):
//! 1. advance the emulated clock; bandwidth and budget windows reset
//! 2. profiler period boundaries; policy period boundaries (scans, bit clears)
//! 3. resolve a due translation miss, forwarding its request
//! 4. commit a due device migration transaction
//! 5. start migrations (device transaction or CPU copy job)
//! 6. issue one CPU-copy line read if a job is in its copy phase
//! 7. admit one arrived request into the device queue
//! 8. forward one queued request through translation to the media
//! 9. release due responses; a CPU job whose reads all returned commits
//! 10. profiler cold-scan tick
//!
//! Writes are posted: they apply to the store and ack at forward time.
//! Reads snapshot the store at forward time and carry the data through the
//! emulated latency/bandwidth path. Requests forward in admission order and
//! migrations move page contents together with their mappings, so the data
//! any read returns equals what a flat byte store would return for the same
//! request sequence; the fuzz suites check exactly that.
//!
//! The host model is closed-loop: a request whose nominal issue cycle has
//! passed waits until the device queue has room and the CPU is not busy
//! (page-table scans and CPU page copies stall it), then enters; its
//! observed latency runs from that entry cycle to its response release.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::emucore::{EmuError, EmuState, Tier, TrafficClass};
use crate::memmodel::{
    BackingStore, MemRequest, Op, PageIndex, CACHELINE_SIZE, LINES_PER_PAGE, PAGE_SIZE,
};
use crate::migrate::{device_swap_timing, MigrationBudget, SWAP_BYTES};
use crate::policies::{
    AccessBitTable, PebsState, PlacementMap, PolicyKind, PteScanState, VictimTracker,
};
use crate::profiler::ProfilerState;
use crate::remap::{Lookup, MigrationPair, RemapCache, RemapError, RemapTables, RemapUnit};
use crate::workloads::trace::{TraceError, TraceReader};
use crate::workloads::{Generator, RequestSource, WorkloadKind};

use super::config::ResolvedConfig;
use super::metrics::{BaselineMetrics, MetricsBuilder, MigrationSummary, RemapMetrics, SimMetrics};
use super::sink::{EventSink, MigrationInitiator, NopSink};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("request page {page} is outside the {limit}-page host-visible space")]
    AddressOutOfRange { page: u64, limit: u64 },
    #[error("request at {addr:#x} size {size} crosses a 4 KiB page boundary")]
    PageStraddle { addr: u64, size: u8 },
    #[error("emulation error: {0}")]
    Emu(#[from] EmuError),
    #[error("remap error: {0}")]
    Remap(#[from] RemapError),
}

/// Runs a simulation to completion.
pub fn run_sim(cfg: &ResolvedConfig) -> Result<SimMetrics, SimError> {
    run_sim_with_sink(cfg, &mut NopSink)
}

/// Runs a simulation, reporting fine-grained events to `sink`.
pub fn run_sim_with_sink<S: EventSink>(
    cfg: &ResolvedConfig,
    sink: &mut S,
) -> Result<SimMetrics, SimError> {
    log::info!(
        "run start: {} regions, {} visible pages ({} metadata), seed {}",
        cfg.regions.len(),
        cfg.host_visible_pages,
        cfg.metadata_pages,
        cfg.seed
    );
    let m = Engine::new(cfg, sink)?.run()?;
    log::info!(
        "run done: {} cycles, {} requests, {} device swaps, {} policy swaps",
        m.total_cycles,
        m.host_requests,
        m.migrations.device_swaps,
        m.migrations.policy_swaps
    );
    Ok(m)
}

/// A request accepted into the device, waiting to be forwarded.
struct Queued {
    req: MemRequest,
    /// Cycle the request entered the device; latency runs from here.
    admit: u64,
    /// Absolute host page (workload page + host base).
    host_page: PageIndex,
    seq: u64,
}

struct Staged {
    req: MemRequest,
    host_page: PageIndex,
}

/// Translation miss being served by a metadata read.
struct PendingMiss {
    dpa_page: PageIndex,
    done: u64,
}

/// Device-side migration transaction in flight.
struct DeviceTxn {
    pair: MigrationPair,
    end: u64,
}

/// CPU-copy migration job (baseline policies).
struct CpuJob {
    hot_host: PageIndex,
    victim_host: PageIndex,
    hot_dpa: PageIndex,
    victim_dpa: PageIndex,
    start: u64,
    /// Line reads begin here, after the per-page software overhead.
    copy_start: u64,
    reads_issued: u64,
    reads_acked: u64,
}

enum BaselineKind {
    PteScan(PteScanState),
    Pebs { st: PebsState, bit_clear_interval_cycles: u64 },
}

struct BaselineRt {
    bits: AccessBitTable,
    victims: VictimTracker,
    kind: BaselineKind,
}

struct Engine<'a, S: EventSink> {
    cfg: &'a ResolvedConfig,
    sink: &'a mut S,
    emu: EmuState,
    store: BackingStore,
    metrics: MetricsBuilder,
    budget: MigrationBudget,

    source: Box<dyn RequestSource>,
    /// Remaining request cap for trace workloads with `ops > 0`.
    ops_left: Option<u64>,
    source_done: bool,
    staged: Option<Staged>,
    wait_q: VecDeque<Queued>,
    depth: usize,
    next_seq: u64,
    next_token: u64,

    // Device-policy state.
    remap: Option<RemapUnit>,
    profiler: Option<ProfilerState>,
    pending_miss: Option<PendingMiss>,
    txn: Option<DeviceTxn>,
    queued_pairs: VecDeque<MigrationPair>,
    /// Hot/cold pages of queued or in-flight pairs; a new pair touching
    /// either set is a duplicate and is discarded.
    cam_hot: BTreeSet<PageIndex>,
    cam_cold: BTreeSet<PageIndex>,

    // Baseline-policy state.
    placement: Option<PlacementMap>,
    baseline: Option<BaselineRt>,
    cpu_job: Option<CpuJob>,
    /// The workload stalls while the CPU is consumed (scans, job overhead).
    cpu_busy_until: u64,

    // Accounting.
    device_swaps: u64,
    policy_swaps: u64,
    budget_deferrals: u64,
    waiting_budget: bool,
    stale_pairs_discarded: u64,
    skipped_already_fast: u64,
    scan_stall_cycles: u64,
    cpu_copy_stall_cycles: u64,

    fast_read_latency: u64,
    host_base: u64,
    host_visible: u64,
}

impl<'a, S: EventSink> Engine<'a, S> {
    fn new(cfg: &'a ResolvedConfig, sink: &'a mut S) -> Result<Self, SimError> {
        let emu = EmuState::new(cfg.regions.clone(), cfg.base_latency_cycles)?;
        let store = BackingStore::new(cfg.total_pages);
        let metrics = MetricsBuilder::new(&cfg.regions, cfg.report.sampling_interval_cycles);
        let budget = MigrationBudget::new(&cfg.migration.budget, cfg.clock_hz);

        let (source, ops_left): (Box<dyn RequestSource>, Option<u64>) = match &cfg.workload.kind {
            WorkloadKind::TraceFile { path } => (
                Box::new(TraceReader::open(path)?),
                (cfg.workload.ops > 0).then_some(cfg.workload.ops),
            ),
            _ => (Box::new(Generator::new(cfg.workload.clone())), None),
        };

        let fast_latency_register = cfg
            .fast_region
            .map(|f| {
                cfg.regions
                    .iter()
                    .find(|r| r.id == f.id)
                    .expect("fast region id comes from the region list")
                    .latency_cycles
            })
            .unwrap_or(0);

        let remap = if matches!(cfg.policy, PolicyKind::Device) {
            let f = cfg.fast_region.expect("validated: device policy has a fast region");
            let tables = RemapTables::new(cfg.total_pages, cfg.metadata_pages, f.pages)?;
            let cache = RemapCache::new(&cfg.remap_cache)?;
            Some(RemapUnit::new(tables, cache))
        } else {
            None
        };

        let profiler = if cfg.profiler.enabled {
            let f = cfg.fast_region.expect("validated: profiler requires a fast region");
            Some(ProfilerState::new(
                cfg.profiler.clone(),
                f.start_page,
                f.pages,
                cfg.metadata_pages,
                cfg.seed,
            ))
        } else {
            None
        };

        let (placement, baseline) = match &cfg.policy {
            PolicyKind::None | PolicyKind::Device => (None, None),
            PolicyKind::PteScan { scan_interval_cycles, scan_cycles_per_page } => {
                let (lo, hi) = cfg.managed_fast_pages().expect("validated: fast region exists");
                (
                    Some(PlacementMap::new(cfg.host_base_page, cfg.host_visible_pages)),
                    Some(BaselineRt {
                        bits: AccessBitTable::new(cfg.host_base_page, cfg.host_visible_pages),
                        victims: VictimTracker::new(lo, hi),
                        kind: BaselineKind::PteScan(PteScanState::new(
                            *scan_interval_cycles,
                            *scan_cycles_per_page,
                        )),
                    }),
                )
            }
            PolicyKind::PebsSample {
                sample_period,
                bit_clear_interval_cycles,
                pending_capacity,
            } => {
                let (lo, hi) = cfg.managed_fast_pages().expect("validated: fast region exists");
                (
                    Some(PlacementMap::new(cfg.host_base_page, cfg.host_visible_pages)),
                    Some(BaselineRt {
                        bits: AccessBitTable::new(cfg.host_base_page, cfg.host_visible_pages),
                        victims: VictimTracker::new(lo, hi),
                        kind: BaselineKind::Pebs {
                            st: PebsState::new(*sample_period, *pending_capacity as usize),
                            bit_clear_interval_cycles: *bit_clear_interval_cycles,
                        },
                    }),
                )
            }
        };

        Ok(Engine {
            cfg,
            sink,
            emu,
            store,
            metrics,
            budget,
            source,
            ops_left,
            source_done: false,
            staged: None,
            wait_q: VecDeque::new(),
            depth: cfg.remap_cache.miss_fifo_depth.max(1),
            next_seq: 0,
            next_token: 0,
            remap,
            profiler,
            pending_miss: None,
            txn: None,
            queued_pairs: VecDeque::new(),
            cam_hot: BTreeSet::new(),
            cam_cold: BTreeSet::new(),
            placement,
            baseline,
            cpu_job: None,
            cpu_busy_until: 0,
            device_swaps: 0,
            policy_swaps: 0,
            budget_deferrals: 0,
            waiting_budget: false,
            stale_pairs_discarded: 0,
            skipped_already_fast: 0,
            scan_stall_cycles: 0,
            cpu_copy_stall_cycles: 0,
            fast_read_latency: cfg.base_latency_cycles + fast_latency_register,
            host_base: cfg.host_base_page,
            host_visible: cfg.host_visible_pages,
        })
    }

    fn run(mut self) -> Result<SimMetrics, SimError> {
        loop {
            self.emu.advance_cycle();
            let now = self.emu.timestamp();
            self.budget.on_cycle(now);
            self.profiler_boundaries(now);
            self.policy_boundaries(now);
            let slot_used = self.resolve_miss(now)?;
            self.commit_due_txn(now)?;
            self.start_device_txn(now)?;
            self.start_cpu_job(now);
            self.cpu_copy_issue(now)?;
            self.admit_one(now)?;
            if !slot_used {
                self.forward_one(now)?;
            }
            self.process_releases(now);
            if let Some(p) = &mut self.profiler {
                let sink = &mut *self.sink;
                p.scan_tick(|page, period| sink.cold_emitted(page, period, now));
            }
            if self.finished() {
                return Ok(self.finalize(now));
            }
        }
    }

    fn finished(&self) -> bool {
        self.source_done
            && self.staged.is_none()
            && self.wait_q.is_empty()
            && self.pending_miss.is_none()
            && self.txn.is_none()
            && self.cpu_job.is_none()
            && self.emu.pending() == 0
    }

    fn profiler_boundaries(&mut self, now: u64) {
        let Some(p) = &mut self.profiler else { return };
        let before = p.bitmap.period_index();
        p.on_cycle(now);
        let after = p.bitmap.period_index();
        if after != before {
            self.sink.bitmap_period_switched(after, now);
        }
    }

    fn policy_boundaries(&mut self, now: u64) {
        let Some(b) = &mut self.baseline else { return };
        match &mut b.kind {
            BaselineKind::PteScan(st) => {
                if now % st.scan_interval_cycles == 0 {
                    let placement =
                        self.placement.as_ref().expect("baselines carry a placement map");
                    let cost = st.scan(&mut b.bits, placement, &mut b.victims);
                    self.cpu_busy_until = self.cpu_busy_until.max(now) + cost;
                    self.scan_stall_cycles += cost;
                }
            }
            BaselineKind::Pebs { bit_clear_interval_cycles, .. } => {
                // The sampling path never walks page tables; the periodic
                // accessed-bit clear that refreshes victim candidates is
                // modeled as free.
                if now % *bit_clear_interval_cycles == 0 {
                    b.bits.clear_all();
                    b.victims.on_clear_all();
                }
            }
        }
    }

    /// Completes a due translation miss and forwards its request,
    /// consuming this cycle's forward slot.
    fn resolve_miss(&mut self, now: u64) -> Result<bool, SimError> {
        match &self.pending_miss {
            Some(m) if m.done <= now => {}
            _ => return Ok(false),
        }
        let dpa_page = self.pending_miss.take().expect("matched above").dpa_page;
        let q = self.wait_q.pop_front().expect("miss always has a waiting request");
        self.remap
            .as_mut()
            .expect("miss implies a remap unit")
            .fill_miss(q.host_page, dpa_page);
        self.forward(q, dpa_page, now)?;
        Ok(true)
    }

    fn commit_due_txn(&mut self, now: u64) -> Result<(), SimError> {
        match &self.txn {
            Some(t) if t.end <= now => {}
            _ => return Ok(()),
        }
        let pair = self.txn.take().expect("matched above").pair;
        self.remap.as_mut().expect("txn implies a remap unit").commit_migration()?;
        self.store.swap_pages(pair.hot_dpa, pair.cold_dpa).expect("pair pages are in range");
        self.cam_hot.remove(&pair.hot_dpa);
        self.cam_cold.remove(&pair.cold_dpa);
        self.device_swaps += 1;
        self.metrics.record_migration_commit(now);
        log::debug!("swap committed at cycle {now}: dpa {} <-> {}", pair.hot_dpa, pair.cold_dpa);
        self.sink.migration_committed(pair, MigrationInitiator::Device, now);
        Ok(())
    }

    fn start_device_txn(&mut self, now: u64) -> Result<(), SimError> {
        if self.txn.is_some() || self.remap.is_none() || self.queued_pairs.is_empty() {
            return Ok(());
        }
        if !self.budget.admits(SWAP_BYTES) {
            if !self.waiting_budget {
                self.waiting_budget = true;
                self.budget_deferrals += 1;
            }
            return Ok(());
        }
        self.waiting_budget = false;
        let pair = self.queued_pairs.pop_front().expect("checked nonempty");
        let consumed = self.budget.try_consume(SWAP_BYTES);
        debug_assert!(consumed);
        // Two reverse-table entries are fetched back to back before the
        // data moves; both reads hit fast memory, where the tables live.
        let meta_latency = 2 * self.fast_read_latency;
        let meta_done = self
            .remap
            .as_mut()
            .expect("checked above")
            .begin_migration(pair, now, meta_latency)?;
        let l_fast = self.latency_register_of(pair.cold_dpa)?;
        let l_slow = self.latency_register_of(pair.hot_dpa)?;
        let timing = device_swap_timing(meta_done, self.emu.base_latency(), l_fast, l_slow);
        self.txn = Some(DeviceTxn { pair, end: timing.end_cycle });
        Ok(())
    }

    fn latency_register_of(&self, page: PageIndex) -> Result<u64, EmuError> {
        let region = self.emu.region_of(page * PAGE_SIZE)?;
        Ok(self.emu.region_config(region)?.latency_cycles)
    }

    fn start_cpu_job(&mut self, now: u64) {
        if self.cpu_job.is_some() || now < self.cpu_busy_until {
            return;
        }
        let Some(b) = &mut self.baseline else { return };
        let has_pending = match &b.kind {
            BaselineKind::PteScan(st) => !st.pending.is_empty(),
            BaselineKind::Pebs { st, .. } => !st.pending.is_empty(),
        };
        if !has_pending {
            return;
        }
        if !self.budget.admits(SWAP_BYTES) {
            if !self.waiting_budget {
                self.waiting_budget = true;
                self.budget_deferrals += 1;
            }
            return;
        }
        let placement = self.placement.as_mut().expect("baselines carry a placement map");
        loop {
            let Some(h) = (match &mut b.kind {
                BaselineKind::PteScan(st) => st.pending.pop_front(),
                BaselineKind::Pebs { st, .. } => st.pop_pending(),
            }) else {
                return;
            };
            let hot_dpa = placement.translate(h);
            if b.victims.contains_fast(hot_dpa) {
                self.skipped_already_fast += 1;
                continue;
            }
            self.waiting_budget = false;
            let consumed = self.budget.try_consume(SWAP_BYTES);
            debug_assert!(consumed);
            let victim_dpa = b.victims.pick();
            let victim_host = placement.reverse(victim_dpa);
            let overhead = 2 * self.cfg.migration.cpu_overhead_cycles_per_page;
            self.cpu_job = Some(CpuJob {
                hot_host: h,
                victim_host,
                hot_dpa,
                victim_dpa,
                start: now,
                copy_start: now + overhead,
                reads_issued: 0,
                reads_acked: 0,
            });
            return;
        }
    }

    /// CPU copies pull both pages line by line through the host port, one
    /// read per cycle, alternating fast/slow; they are subject to region
    /// bandwidth budgets like any host traffic.
    fn cpu_copy_issue(&mut self, now: u64) -> Result<(), SimError> {
        let Some(j) = &mut self.cpu_job else { return Ok(()) };
        if now < j.copy_start || j.reads_issued >= 2 * LINES_PER_PAGE {
            return Ok(());
        }
        let k = j.reads_issued;
        let (page, line) = if k % 2 == 0 { (j.victim_dpa, k / 2) } else { (j.hot_dpa, k / 2) };
        let addr = page * PAGE_SIZE + line * CACHELINE_SIZE;
        let token = self.next_token;
        self.next_token += 1;
        self.emu.submit(token, addr, now, None, TrafficClass::CpuMigration)?;
        j.reads_issued += 1;
        let region = self.emu.region_of(addr)?;
        self.metrics.record_cpu_migration_line(region, Op::Read);
        Ok(())
    }

    fn admit_one(&mut self, now: u64) -> Result<(), SimError> {
        if self.staged.is_none() && !self.source_done {
            if self.ops_left == Some(0) {
                self.source_done = true;
            } else {
                match self.source.next_request()? {
                    None => self.source_done = true,
                    Some(req) => {
                        if let Some(n) = &mut self.ops_left {
                            *n -= 1;
                        }
                        let wp = req.addr.page();
                        if wp >= self.host_visible {
                            return Err(SimError::AddressOutOfRange {
                                page: wp,
                                limit: self.host_visible,
                            });
                        }
                        if req.addr.page_offset() + req.size as u64 > PAGE_SIZE {
                            return Err(SimError::PageStraddle {
                                addr: req.addr.0,
                                size: req.size,
                            });
                        }
                        self.staged = Some(Staged { req, host_page: self.host_base + wp });
                    }
                }
            }
        }
        let Some(s) = &self.staged else { return Ok(()) };
        if s.req.issue_cycle > now
            || self.wait_q.len() >= self.depth
            || self.cpu_job.is_some()
            || now < self.cpu_busy_until
        {
            return Ok(());
        }
        let s = self.staged.take().expect("checked above");
        let seq = self.next_seq;
        self.next_seq += 1;
        self.wait_q.push_back(Queued { req: s.req, admit: now, host_page: s.host_page, seq });
        Ok(())
    }

    fn forward_one(&mut self, now: u64) -> Result<(), SimError> {
        if self.txn.is_some() || self.pending_miss.is_some() {
            return Ok(());
        }
        let Some(front) = self.wait_q.front() else { return Ok(()) };
        let host_page = front.host_page;
        let dpa_page = if let Some(r) = &mut self.remap {
            match r.translate(host_page)? {
                Lookup::Hit(d) => d,
                Lookup::Miss(d) => {
                    self.pending_miss =
                        Some(PendingMiss { dpa_page: d, done: now + self.fast_read_latency });
                    return Ok(());
                }
            }
        } else if let Some(p) = &self.placement {
            p.translate(host_page)
        } else {
            host_page // static identity placement
        };
        let q = self.wait_q.pop_front().expect("checked nonempty");
        self.forward(q, dpa_page, now)
    }

    /// The serialization point: store effects happen here, in admission
    /// order, exactly once per request.
    fn forward(&mut self, q: Queued, dpa_page: PageIndex, now: u64) -> Result<(), SimError> {
        let Queued { req, admit, host_page, seq } = q;
        let offset = req.addr.page_offset();
        let dpa = dpa_page * PAGE_SIZE + offset;
        let region = self.emu.region_of(dpa)?;
        let tier = self.emu.region_config(region)?.tier;
        let read_data = match req.op {
            Op::Read => {
                let data =
                    self.store.read_line(dpa, req.size).expect("translated address in range");
                let token = self.next_token;
                self.next_token += 1;
                self.emu.submit(token, dpa, admit, Some(data), TrafficClass::Host)?;
                Some(data)
            }
            Op::Write => {
                let payload = req.payload.as_ref().expect("writes carry a payload");
                self.store.write(dpa, payload.as_slice()).expect("translated address in range");
                None
            }
        };
        self.metrics.record_host_access(region, tier, req.op, req.size as u64, now);
        let hpa = host_page * PAGE_SIZE + offset;
        self.sink.request_forwarded(seq, &req, hpa, dpa, read_data.as_ref(), now);

        if let Some(b) = &mut self.baseline {
            b.bits.set(host_page);
            b.victims.on_access(dpa_page);
            if let BaselineKind::Pebs { st, .. } = &mut b.kind {
                if req.op == Op::Read && tier == Tier::Slow {
                    st.on_slow_read(host_page);
                }
            }
        }

        if let Some(p) = &mut self.profiler {
            match req.op {
                Op::Write => p.observe_write(dpa_page),
                Op::Read => {
                    let detections_before = p.stats.hot_detections;
                    let space =
                        self.queued_pairs.len() < p.cfg.pending_pairs_capacity;
                    let pair = p.observe_read(dpa_page, space);
                    if p.stats.hot_detections > detections_before {
                        self.sink.hot_detected(dpa_page, now);
                    }
                    if let Some(pair) = pair {
                        self.sink.pair_emitted(pair, now);
                        if self.cam_hot.contains(&pair.hot_dpa)
                            || self.cam_cold.contains(&pair.cold_dpa)
                        {
                            self.stale_pairs_discarded += 1;
                        } else {
                            self.cam_hot.insert(pair.hot_dpa);
                            self.cam_cold.insert(pair.cold_dpa);
                            self.queued_pairs.push_back(pair);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn process_releases(&mut self, now: u64) {
        for r in self.emu.release_ready() {
            match r.class {
                TrafficClass::Host => {
                    self.metrics.record_read_latency(r.release_cycle - r.issue_cycle);
                    self.sink.response_released(r.dpa, r.submit_cycle, r.release_cycle);
                }
                TrafficClass::CpuMigration => {
                    let j = self.cpu_job.as_mut().expect("copy response implies a job");
                    j.reads_acked += 1;
                    if j.reads_acked == 2 * LINES_PER_PAGE {
                        self.finish_cpu_job(now);
                    }
                }
                TrafficClass::Probe => unreachable!("the engine submits no probe traffic"),
            }
        }
    }

    fn finish_cpu_job(&mut self, now: u64) {
        let j = self.cpu_job.take().expect("called with a job");
        // Writes are posted: both rewritten pages are charged as line
        // writes but add no latency, matching the write path for hosts.
        for page in [j.victim_dpa, j.hot_dpa] {
            let region = self.emu.region_of(page * PAGE_SIZE).expect("page in range");
            for _ in 0..LINES_PER_PAGE {
                self.metrics.record_cpu_migration_line(region, Op::Write);
            }
        }
        self.store.swap_pages(j.hot_dpa, j.victim_dpa).expect("pages in range");
        let placement = self.placement.as_mut().expect("job implies a placement map");
        placement.swap_hosts(j.hot_host, j.victim_host);
        let b = self.baseline.as_mut().expect("job implies a baseline policy");
        b.victims.on_promote_into(j.victim_dpa);
        self.policy_swaps += 1;
        self.cpu_copy_stall_cycles += now - j.start + 1;
        self.metrics.record_migration_commit(now);
        self.sink.migration_committed(
            MigrationPair { hot_dpa: j.hot_dpa, cold_dpa: j.victim_dpa },
            MigrationInitiator::Policy,
            now,
        );
    }

    fn finalize(self, total_cycles: u64) -> SimMetrics {
        if let Some(r) = &self.remap {
            assert!(r.tables.is_permutation(), "remap tables corrupted");
        }
        if let Some(p) = &self.placement {
            assert!(p.is_permutation(), "placement map corrupted");
        }
        let pending_policy = self
            .baseline
            .as_ref()
            .map(|b| match &b.kind {
                BaselineKind::PteScan(st) => st.pending.len() as u64,
                BaselineKind::Pebs { st, .. } => st.pending.len() as u64,
            })
            .unwrap_or(0);
        let swaps = self.device_swaps + self.policy_swaps;
        let migrations = MigrationSummary {
            swaps_committed: swaps,
            device_swaps: self.device_swaps,
            policy_swaps: self.policy_swaps,
            pages_moved: 2 * swaps,
            bytes_moved: SWAP_BYTES * swaps,
            budget_bytes_per_window: self.budget.bytes_per_window(),
            budget_window_cycles: self.budget.window_cycles(),
            budget_deferrals: self.budget_deferrals,
            max_bytes_in_window: self.budget.max_consumed_in_window,
            pending_at_end: self.queued_pairs.len() as u64 + pending_policy,
            stale_pairs_discarded: self.stale_pairs_discarded,
            skipped_already_fast: self.skipped_already_fast,
            cpu_copy_stall_cycles: self.cpu_copy_stall_cycles,
        };
        let remap_metrics = match &self.remap {
            Some(r) => {
                let (h, m) = (r.cache.hits(), r.cache.misses());
                RemapMetrics {
                    cache_hits: h,
                    cache_misses: m,
                    hit_rate: if h + m == 0 { 0.0 } else { h as f64 / (h + m) as f64 },
                    metadata_reads: r.metadata_reads(),
                    metadata_writes: r.metadata_writes(),
                }
            }
            None => RemapMetrics::default(),
        };
        let baseline_metrics = match &self.baseline {
            Some(b) => match &b.kind {
                BaselineKind::PteScan(st) => BaselineMetrics {
                    scans_completed: st.scans,
                    pages_walked: st.pages_walked_total,
                    scan_stall_cycles: self.scan_stall_cycles,
                    ..Default::default()
                },
                BaselineKind::Pebs { st, .. } => BaselineMetrics {
                    samples_taken: st.samples,
                    samples_dropped_full: st.dropped_full,
                    samples_dropped_duplicate: st.dropped_duplicate,
                    ..Default::default()
                },
            },
            None => BaselineMetrics::default(),
        };
        let profiler_stats = self.profiler.as_ref().map(|p| p.stats).unwrap_or_default();
        self.metrics.finalize(
            total_cycles,
            migrations,
            profiler_stats,
            remap_metrics,
            baseline_metrics,
            self.cfg.clone(),
        )
    }
}
