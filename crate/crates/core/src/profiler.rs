//! Hot/cold page detection.
//!
//! Hot detection: reads to slow memory feed a count-min sketch of D rows by
//! W saturating counters. Each counter carries a hot bit; a page whose
//! minimum counter reaches the hot threshold is reported hot exactly once
//! per reset period (the hot bits suppress repeats until the periodic
//! reset).
//!
//! Cold detection: reads to fast memory set bits in the active half of a
//! ping-pong bitmap. Every period the halves swap and a scanner walks the
//! newly inactive half under a per-cycle page budget, buffering unset pages
//! as cold candidates. Buffered pages that get accessed again are lazily
//! discarded when popped.
//!
//! A rate limiter caps emitted migration pairs per window. Profiling is
//! observation-only: nothing here adds latency to any request.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::memmodel::PageIndex;
use crate::remap::MigrationPair;

/// Profiler parameters. Defaults follow the hardware sizing: a 4x4096
/// sketch of 8-bit counters, threshold 8, 1M-cycle sketch reset, and 32
/// pairs per 100k-cycle window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilerConfig {
    pub depth: u32,
    pub width: u32,
    pub counter_max: u32,
    pub hot_threshold: u32,
    pub reset_period_cycles: u64,
    pub bitmap_period_cycles: u64,
    pub scan_budget_pages_per_cycle: u32,
    pub cold_buffer_capacity: usize,
    pub pair_window_cycles: u64,
    pub max_pairs_per_window: u32,
    pub pending_pairs_capacity: usize,
    pub enabled: bool,
}

impl Default for ProfilerConfig {
    fn default() -> Self {
        ProfilerConfig {
            depth: 4,
            width: 4096,
            counter_max: 255,
            hot_threshold: 8,
            reset_period_cycles: 1_000_000,
            bitmap_period_cycles: 100_000,
            scan_budget_pages_per_cycle: 4,
            cold_buffer_capacity: 1024,
            pair_window_cycles: 100_000,
            max_pairs_per_window: 32,
            pending_pairs_capacity: 64,
            enabled: true,
        }
    }
}

/// Count-min sketch with per-counter hot bits and saturating counters.
pub struct SketchState {
    depth: usize,
    width: usize,
    counter_max: u32,
    threshold: u32,
    seeds: Vec<u64>,
    counters: Vec<u32>,
    hot_bits: Vec<bool>,
}

impl SketchState {
    pub fn new(depth: u32, width: u32, counter_max: u32, threshold: u32, master_seed: u64) -> Self {
        assert!(depth >= 1 && width >= 1);
        assert!(threshold >= 1 && threshold <= counter_max);
        // Row hashes are multiply-shift with odd seeds drawn from the run's
        // master seed, so two runs with equal seeds hash identically.
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ 0x9e3779b97f4a7c15);
        let seeds = (0..depth).map(|_| rng.random::<u64>() | 1).collect();
        SketchState {
            depth: depth as usize,
            width: width as usize,
            counter_max,
            threshold,
            seeds,
            counters: vec![0; (depth * width) as usize],
            hot_bits: vec![false; (depth * width) as usize],
        }
    }

    #[inline]
    fn slot(&self, row: usize, page: PageIndex) -> usize {
        let h = page.wrapping_mul(self.seeds[row]);
        // Scale the upper 32 hash bits into [0, width) without modulo bias.
        let col = (((h >> 32) * self.width as u64) >> 32) as usize;
        row * self.width + col
    }

    /// Records one access. Returns true exactly when the page crosses the
    /// hot threshold for the first time in the current reset period.
    pub fn observe(&mut self, page: PageIndex) -> bool {
        let mut min = u32::MAX;
        let mut all_hot = true;
        for row in 0..self.depth {
            let s = self.slot(row, page);
            let c = self.counters[s].saturating_add(1).min(self.counter_max);
            self.counters[s] = c;
            min = min.min(c);
            all_hot &= self.hot_bits[s];
        }
        if min >= self.threshold && !all_hot {
            for row in 0..self.depth {
                let s = self.slot(row, page);
                self.hot_bits[s] = true;
            }
            true
        } else {
            false
        }
    }

    /// Point estimate: minimum counter over the D rows. Never underestimates
    /// the true count (up to counter saturation).
    pub fn estimate(&self, page: PageIndex) -> u32 {
        (0..self.depth).map(|row| self.counters[self.slot(row, page)]).min().unwrap()
    }

    pub fn is_marked_hot(&self, page: PageIndex) -> bool {
        (0..self.depth).all(|row| self.hot_bits[self.slot(row, page)])
    }

    /// Zeroes all counters and hot bits (periodic reset).
    pub fn reset(&mut self) {
        self.counters.fill(0);
        self.hot_bits.fill(false);
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }
}

/// Ping-pong access bitmap over the fast region's pages.
///
/// The active half records this period's accesses; the inactive half holds
/// last period's record and is consumed by the scanner. Indexes are
/// fast-region-relative page numbers.
pub struct PingPongBitmap {
    pages: u64,
    a: Vec<u64>,
    b: Vec<u64>,
    active_is_a: bool,
    cursor: u64,
    period_index: u64,
}

fn bit_get(words: &[u64], i: u64) -> bool {
    words[(i / 64) as usize] >> (i % 64) & 1 == 1
}

fn bit_set(words: &mut [u64], i: u64) {
    words[(i / 64) as usize] |= 1 << (i % 64);
}

impl PingPongBitmap {
    pub fn new(pages: u64) -> Self {
        let words = pages.div_ceil(64) as usize;
        PingPongBitmap {
            pages,
            a: vec![0; words],
            b: vec![0; words],
            active_is_a: true,
            cursor: 0,
            period_index: 0,
        }
    }

    pub fn pages(&self) -> u64 {
        self.pages
    }

    pub fn period_index(&self) -> u64 {
        self.period_index
    }

    /// The period whose record the scanner is currently consuming.
    pub fn scanned_period(&self) -> u64 {
        debug_assert!(self.period_index > 0);
        self.period_index - 1
    }

    fn active(&mut self) -> &mut Vec<u64> {
        if self.active_is_a {
            &mut self.a
        } else {
            &mut self.b
        }
    }

    fn inactive(&self) -> &Vec<u64> {
        if self.active_is_a {
            &self.b
        } else {
            &self.a
        }
    }

    /// Records an access to a fast page in the active half.
    pub fn observe(&mut self, fast_page: u64) {
        debug_assert!(fast_page < self.pages);
        bit_set(self.active(), fast_page);
    }

    /// Whether the page was accessed in the current (recording) period.
    pub fn active_bit(&self, fast_page: u64) -> bool {
        let arr = if self.active_is_a { &self.a } else { &self.b };
        bit_get(arr, fast_page)
    }

    /// Whether the page was accessed in the period under scan.
    pub fn inactive_bit(&self, fast_page: u64) -> bool {
        bit_get(self.inactive(), fast_page)
    }

    /// Period boundary: the half that just recorded becomes the scan
    /// target; the other half is zeroed and starts recording.
    pub fn switch_period(&mut self) {
        self.active_is_a = !self.active_is_a;
        self.active().fill(0);
        self.cursor = 0;
        self.period_index += 1;
    }

    /// Walks up to `budget` pages of the inactive half from the cursor,
    /// invoking `on_cold` for each page with no recorded access. One full
    /// pass per period; scanning before the first switch is a no-op (there
    /// is no completed period to classify yet).
    pub fn scan_chunk(&mut self, budget: u32, mut on_cold: impl FnMut(u64)) {
        if self.period_index == 0 {
            return;
        }
        let end = (self.cursor + budget as u64).min(self.pages);
        let inactive = if self.active_is_a { &self.b } else { &self.a };
        for i in self.cursor..end {
            if !bit_get(inactive, i) {
                on_cold(i);
            }
        }
        self.cursor = end;
    }

    pub fn scan_done(&self) -> bool {
        self.cursor >= self.pages
    }
}

/// Outcome of a cold-buffer insertion attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColdPush {
    Inserted,
    Duplicate,
    Full,
}

/// Bounded FIFO of cold fast-page candidates with uniqueness and lazy
/// staleness discard.
pub struct ColdPageBuffer {
    fifo: std::collections::VecDeque<u64>,
    in_buffer: Vec<u64>,
    capacity: usize,
}

impl ColdPageBuffer {
    pub fn new(capacity: usize, fast_pages: u64) -> Self {
        ColdPageBuffer {
            fifo: std::collections::VecDeque::with_capacity(capacity.min(4096)),
            in_buffer: vec![0; fast_pages.div_ceil(64) as usize],
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn push(&mut self, fast_page: u64) -> ColdPush {
        if bit_get(&self.in_buffer, fast_page) {
            return ColdPush::Duplicate;
        }
        if self.fifo.len() >= self.capacity {
            return ColdPush::Full;
        }
        bit_set(&mut self.in_buffer, fast_page);
        self.fifo.push_back(fast_page);
        ColdPush::Inserted
    }

    /// Pops the oldest candidate that has not been accessed in the current
    /// recording period, discarding stale entries along the way. Returns
    /// `(page, discarded_count)`.
    pub fn pop_valid(&mut self, bitmap: &PingPongBitmap) -> (Option<u64>, u64) {
        let mut discarded = 0;
        while let Some(p) = self.fifo.pop_front() {
            let w = (p / 64) as usize;
            self.in_buffer[w] &= !(1 << (p % 64));
            if bitmap.active_bit(p) {
                discarded += 1;
                continue;
            }
            return (Some(p), discarded);
        }
        (None, discarded)
    }
}

/// Sliding-window pair emission limiter: at most `max_pairs` per window.
pub struct PairRateLimiter {
    max_pairs: u32,
    emitted_this_window: u32,
}

impl PairRateLimiter {
    pub fn new(max_pairs: u32) -> Self {
        PairRateLimiter { max_pairs, emitted_this_window: 0 }
    }

    pub fn window_reset(&mut self) {
        self.emitted_this_window = 0;
    }

    pub fn available(&self) -> bool {
        self.emitted_this_window < self.max_pairs
    }

    pub fn acquire(&mut self) {
        debug_assert!(self.available());
        self.emitted_this_window += 1;
    }

    pub fn emitted_this_window(&self) -> u32 {
        self.emitted_this_window
    }
}

/// Counters exported into run metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfilerStats {
    pub slow_reads_observed: u64,
    pub fast_reads_observed: u64,
    pub hot_detections: u64,
    pub pairs_emitted: u64,
    pub dropped_rate_limited: u64,
    pub dropped_backpressure: u64,
    pub dropped_no_cold: u64,
    pub cold_candidates: u64,
    pub cold_inserted: u64,
    pub cold_dropped_full: u64,
    pub cold_discarded_stale: u64,
    /// Highest pair count observed in any single rate-limit window.
    pub max_pairs_in_window: u32,
}

/// The profiling unit: sketch + bitmaps + cold buffer + rate limiter.
pub struct ProfilerState {
    pub cfg: ProfilerConfig,
    pub sketch: SketchState,
    pub bitmap: PingPongBitmap,
    pub cold: ColdPageBuffer,
    pub limiter: PairRateLimiter,
    pub stats: ProfilerStats,
    fast_start_page: u64,
    metadata_pages: u64,
    /// Reusable buffer for scan_tick candidates (hot path, avoids allocs).
    scratch: Vec<u64>,
}

impl ProfilerState {
    pub fn new(cfg: ProfilerConfig, fast_start_page: u64, fast_pages: u64, metadata_pages: u64, master_seed: u64) -> Self {
        let sketch =
            SketchState::new(cfg.depth, cfg.width, cfg.counter_max, cfg.hot_threshold, master_seed);
        let bitmap = PingPongBitmap::new(fast_pages);
        let cold = ColdPageBuffer::new(cfg.cold_buffer_capacity, fast_pages);
        let limiter = PairRateLimiter::new(cfg.max_pairs_per_window);
        ProfilerState {
            cfg,
            sketch,
            bitmap,
            cold,
            limiter,
            stats: ProfilerStats::default(),
            fast_start_page,
            metadata_pages,
            scratch: Vec::new(),
        }
    }

    /// Applies the periodic boundaries that fall on this cycle.
    /// Call once per cycle before observations.
    pub fn on_cycle(&mut self, now: u64) {
        if now % self.cfg.reset_period_cycles == 0 {
            self.sketch.reset();
        }
        if now % self.cfg.bitmap_period_cycles == 0 {
            self.bitmap.switch_period();
        }
        if now % self.cfg.pair_window_cycles == 0 {
            self.limiter.window_reset();
        }
    }

    fn fast_index(&self, dpa_page: PageIndex) -> Option<u64> {
        let rel = dpa_page.checked_sub(self.fast_start_page)?;
        (rel < self.bitmap.pages()).then_some(rel)
    }

    /// Observes one host read at its device page. Fast reads feed the cold
    /// bitmap; slow reads feed the sketch and may produce a migration pair.
    /// `queue_has_space` reflects downstream capacity for emitted pairs.
    pub fn observe_read(&mut self, dpa_page: PageIndex, queue_has_space: bool) -> Option<MigrationPair> {
        if !self.cfg.enabled {
            return None;
        }
        if let Some(idx) = self.fast_index(dpa_page) {
            self.stats.fast_reads_observed += 1;
            self.bitmap.observe(idx);
            return None;
        }
        self.stats.slow_reads_observed += 1;
        if !self.sketch.observe(dpa_page) {
            return None;
        }
        self.stats.hot_detections += 1;
        if !self.limiter.available() {
            self.stats.dropped_rate_limited += 1;
            return None;
        }
        if !queue_has_space {
            self.stats.dropped_backpressure += 1;
            return None;
        }
        let (popped, discarded) = self.cold.pop_valid(&self.bitmap);
        self.stats.cold_discarded_stale += discarded;
        let Some(cold_idx) = popped else {
            self.stats.dropped_no_cold += 1;
            return None;
        };
        self.limiter.acquire();
        self.stats.pairs_emitted += 1;
        self.stats.max_pairs_in_window =
            self.stats.max_pairs_in_window.max(self.limiter.emitted_this_window());
        Some(MigrationPair { hot_dpa: dpa_page, cold_dpa: self.fast_start_page + cold_idx })
    }

    /// Observes one host write at its device page. Writes count as activity
    /// for cold classification (a written page is not cold), but do not feed
    /// hot detection: writes are posted and complete at base latency, so
    /// promoting write-hot pages would not shorten any latency this device
    /// models.
    pub fn observe_write(&mut self, dpa_page: PageIndex) {
        if !self.cfg.enabled {
            return;
        }
        if let Some(idx) = self.fast_index(dpa_page) {
            self.bitmap.observe(idx);
        }
    }

    /// One cycle of cold scanning under the page budget. Invokes
    /// `on_candidate(dpa_page, classified_period)` for every page the scan
    /// classifies cold (before deduplication), then buffers it.
    pub fn scan_tick(&mut self, mut on_candidate: impl FnMut(PageIndex, u64)) {
        if !self.cfg.enabled || self.bitmap.period_index() == 0 || self.bitmap.scan_done() {
            return;
        }
        let period = self.bitmap.scanned_period();
        let budget = self.cfg.scan_budget_pages_per_cycle;
        let meta = self.metadata_pages;
        let fast_start = self.fast_start_page;
        let mut found = std::mem::take(&mut self.scratch);
        found.clear();
        self.bitmap.scan_chunk(budget, |idx| {
            if idx >= meta {
                found.push(idx);
            }
        });
        for &idx in &found {
            self.stats.cold_candidates += 1;
            on_candidate(fast_start + idx, period);
            match self.cold.push(idx) {
                ColdPush::Inserted => self.stats.cold_inserted += 1,
                ColdPush::Duplicate => {}
                ColdPush::Full => self.stats.cold_dropped_full += 1,
            }
        }
        self.scratch = found;
    }
}
