//! Placement policies: the device-driven policy plus host-software
//! baselines (periodic PTE scanning and PEBS-style sampling), and the
//! placement bookkeeping they share.
//!
//! Baselines model host-managed tiering: they never touch the device remap
//! unit. Their page moves are placement-table updates, and the data motion
//! is charged as CPU copies through the host bandwidth path by the engine.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::memmodel::PageIndex;

/// Which placement policy drives migrations.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    /// Static placement; no migrations ever.
    None,
    /// Periodic full walk of per-page accessed bits; promotes slow-resident
    /// pages with set bits. The walk costs CPU time.
    PteScan {
        scan_interval_cycles: u64,
        /// CPU cost per page walked; the workload stalls for the duration.
        scan_cycles_per_page: u64,
    },
    /// Every Nth slow-memory read overflows a counter and promotes the
    /// sampled page.
    PebsSample {
        sample_period: u64,
        /// Victim selection shares the accessed-bit rule with PteScan; the
        /// bits are cleared at this interval (modeled as free, since the
        /// sampling path does not walk page tables).
        bit_clear_interval_cycles: u64,
        /// Bound on the queue of sampled pages awaiting promotion.
        pending_capacity: u64,
    },
    /// Device-side tiering: profiling, remapping and migration run in the
    /// device; the host only issues normal requests.
    Device,
}

impl PolicyKind {
    pub fn is_baseline(&self) -> bool {
        matches!(self, PolicyKind::PteScan { .. } | PolicyKind::PebsSample { .. })
    }
}

/// Host page -> device page placement for host-managed policies. Covers
/// the host-visible range [base, base+len); identity-initialized, so low
/// host pages start in fast memory (fast fills first).
pub struct PlacementMap {
    base: u64,
    fwd: Vec<u32>,
    rev: Vec<u32>,
}

impl PlacementMap {
    pub fn new(base: u64, len: u64) -> Self {
        assert!(base + len <= u32::MAX as u64, "page space exceeds u32 indexing");
        let fwd: Vec<u32> = (base..base + len).map(|p| p as u32).collect();
        let rev = fwd.clone();
        PlacementMap { base, fwd, rev }
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn len(&self) -> u64 {
        self.fwd.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    #[inline]
    fn idx(&self, page: PageIndex) -> usize {
        debug_assert!(
            page >= self.base && page < self.base + self.fwd.len() as u64,
            "page {page} outside managed range"
        );
        (page - self.base) as usize
    }

    /// Device page currently holding the host page.
    #[inline]
    pub fn translate(&self, host_page: PageIndex) -> PageIndex {
        self.fwd[self.idx(host_page)] as u64
    }

    /// Host page currently stored at the device page.
    #[inline]
    pub fn reverse(&self, device_page: PageIndex) -> PageIndex {
        self.rev[self.idx(device_page)] as u64
    }

    /// Exchanges the device locations of two host pages.
    pub fn swap_hosts(&mut self, host_a: PageIndex, host_b: PageIndex) {
        let (ia, ib) = (self.idx(host_a), self.idx(host_b));
        self.fwd.swap(ia, ib);
        let (da, db) = (self.fwd[ia], self.fwd[ib]);
        let (ra, rb) = (self.idx(da as u64), self.idx(db as u64));
        self.rev[ra] = host_a as u32;
        self.rev[rb] = host_b as u32;
    }

    /// Both tables are mutually inverse bijections over the managed range.
    pub fn is_permutation(&self) -> bool {
        self.fwd.iter().enumerate().all(|(i, &d)| {
            let di = d as u64 - self.base;
            (di as usize) < self.rev.len() && self.rev[di as usize] as u64 == self.base + i as u64
        })
    }
}

/// One accessed bit per host-visible page, set by the engine on every
/// request (the PTE accessed-bit analogue).
pub struct AccessBitTable {
    base: u64,
    bits: Vec<u64>,
    pages: u64,
    set_count: u64,
}

impl AccessBitTable {
    pub fn new(base: u64, pages: u64) -> Self {
        AccessBitTable { base, bits: vec![0; pages.div_ceil(64) as usize], pages, set_count: 0 }
    }

    #[inline]
    fn pos(&self, host_page: PageIndex) -> (usize, u64) {
        let i = host_page - self.base;
        debug_assert!(i < self.pages);
        ((i / 64) as usize, i % 64)
    }

    /// Sets the bit; returns true if it was previously clear.
    pub fn set(&mut self, host_page: PageIndex) -> bool {
        let (w, b) = self.pos(host_page);
        let was_clear = self.bits[w] >> b & 1 == 0;
        self.bits[w] |= 1 << b;
        self.set_count += was_clear as u64;
        was_clear
    }

    pub fn get(&self, host_page: PageIndex) -> bool {
        let (w, b) = self.pos(host_page);
        self.bits[w] >> b & 1 == 1
    }

    pub fn clear_all(&mut self) {
        self.bits.fill(0);
        self.set_count = 0;
    }

    pub fn set_count(&self) -> u64 {
        self.set_count
    }

    pub fn pages(&self) -> u64 {
        self.pages
    }
}

/// Tracks fast-region victim candidates for the baselines: coldest first
/// (accessed bit clear), ties and the all-hot fallback resolved by lowest
/// device page index. Holds device pages in the managed fast range.
pub struct VictimTracker {
    clear_fast: BTreeSet<u32>,
    fast_lo: u32,
    fast_hi: u32,
}

impl VictimTracker {
    /// Managed fast device pages are [fast_lo, fast_hi) (metadata already
    /// excluded by the caller).
    pub fn new(fast_lo: u64, fast_hi: u64) -> Self {
        assert!(fast_lo < fast_hi, "no fast pages to manage");
        VictimTracker {
            clear_fast: (fast_lo as u32..fast_hi as u32).collect(),
            fast_lo: fast_lo as u32,
            fast_hi: fast_hi as u32,
        }
    }

    #[inline]
    pub fn contains_fast(&self, device_page: PageIndex) -> bool {
        (self.fast_lo as u64..self.fast_hi as u64).contains(&device_page)
    }

    /// The host page at `device_page` was accessed: it is no longer cold.
    pub fn on_access(&mut self, device_page: PageIndex) {
        if self.contains_fast(device_page) {
            self.clear_fast.remove(&(device_page as u32));
        }
    }

    /// All accessed bits were cleared: every fast page is cold again.
    pub fn on_clear_all(&mut self) {
        self.clear_fast = (self.fast_lo..self.fast_hi).collect();
    }

    /// A promotion landed a hot page on `device_page`.
    pub fn on_promote_into(&mut self, device_page: PageIndex) {
        debug_assert!(self.contains_fast(device_page));
        self.clear_fast.remove(&(device_page as u32));
    }

    /// Lowest cold fast page, or the lowest fast page if none is cold
    /// (there is always a victim).
    pub fn pick(&self) -> PageIndex {
        self.clear_fast.first().copied().unwrap_or(self.fast_lo) as u64
    }

    pub fn cold_count(&self) -> usize {
        self.clear_fast.len()
    }
}

/// PTE-scan policy state.
pub struct PteScanState {
    pub scan_interval_cycles: u64,
    pub scan_cycles_per_page: u64,
    /// Host pages queued for promotion; refreshed (replaced) each scan, so
    /// stale candidates must re-earn their accessed bit.
    pub pending: VecDeque<PageIndex>,
    pub scans: u64,
    pub pages_walked_total: u64,
}

impl PteScanState {
    pub fn new(scan_interval_cycles: u64, scan_cycles_per_page: u64) -> Self {
        assert!(scan_interval_cycles > 0);
        PteScanState {
            scan_interval_cycles,
            scan_cycles_per_page,
            pending: VecDeque::new(),
            scans: 0,
            pages_walked_total: 0,
        }
    }

    /// Full walk: collect slow-resident pages with set bits in ascending
    /// host page order, replace the pending queue, clear all bits.
    /// Returns the CPU cycles the walk costs.
    pub fn scan(
        &mut self,
        bits: &mut AccessBitTable,
        placement: &PlacementMap,
        victims: &mut VictimTracker,
    ) -> u64 {
        let base = placement.base();
        let len = placement.len();
        self.pending.clear();
        for h in base..base + len {
            if bits.get(h) && !victims.contains_fast(placement.translate(h)) {
                self.pending.push_back(h);
            }
        }
        bits.clear_all();
        victims.on_clear_all();
        self.scans += 1;
        self.pages_walked_total += len;
        len * self.scan_cycles_per_page
    }
}

/// PEBS-sampling policy state.
pub struct PebsState {
    pub sample_period: u64,
    slow_reads_seen: u64,
    pub pending: VecDeque<PageIndex>,
    pending_set: HashSet<PageIndex>,
    pub capacity: usize,
    pub samples: u64,
    pub dropped_full: u64,
    pub dropped_duplicate: u64,
}

impl PebsState {
    pub fn new(sample_period: u64, capacity: usize) -> Self {
        assert!(sample_period > 0);
        PebsState {
            sample_period,
            slow_reads_seen: 0,
            pending: VecDeque::new(),
            pending_set: HashSet::new(),
            capacity,
            samples: 0,
            dropped_full: 0,
            dropped_duplicate: 0,
        }
    }

    /// Counts one slow-memory read; every `sample_period`-th one queues the
    /// page for promotion (deduplicated against the pending queue).
    pub fn on_slow_read(&mut self, host_page: PageIndex) {
        self.slow_reads_seen += 1;
        if self.slow_reads_seen % self.sample_period != 0 {
            return;
        }
        self.samples += 1;
        if self.pending_set.contains(&host_page) {
            self.dropped_duplicate += 1;
            return;
        }
        if self.pending.len() >= self.capacity {
            self.dropped_full += 1;
            return;
        }
        self.pending_set.insert(host_page);
        self.pending.push_back(host_page);
    }

    pub fn pop_pending(&mut self) -> Option<PageIndex> {
        let h = self.pending.pop_front()?;
        self.pending_set.remove(&h);
        Some(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn placement_identity_then_swaps_stay_bijective() {
        let mut pm = PlacementMap::new(2, 256);
        assert_eq!(pm.translate(2), 2);
        assert_eq!(pm.translate(257), 257);
        assert_eq!(pm.reverse(100), 100);

        pm.swap_hosts(2, 200);
        assert_eq!(pm.translate(2), 200);
        assert_eq!(pm.translate(200), 2);
        assert_eq!(pm.reverse(2), 200);
        assert_eq!(pm.reverse(200), 2);
        assert!(pm.is_permutation());

        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..1000 {
            let a = rng.random_range(2..258u64);
            let b = rng.random_range(2..258u64);
            pm.swap_hosts(a, b);
        }
        assert!(pm.is_permutation());
        // Forward and reverse stay mutually consistent page by page.
        for h in 2..258u64 {
            assert_eq!(pm.reverse(pm.translate(h)), h);
        }
    }

    #[test]
    fn access_bits_set_get_clear() {
        let mut t = AccessBitTable::new(10, 100);
        assert!(!t.get(10));
        assert!(t.set(10));
        assert!(!t.set(10), "second set reports already-set");
        assert!(t.get(10));
        t.set(109);
        assert_eq!(t.set_count(), 2);
        t.clear_all();
        assert_eq!(t.set_count(), 0);
        assert!(!t.get(10));
    }

    #[test]
    fn victim_prefers_coldest_lowest_index() {
        let mut v = VictimTracker::new(4, 8); // fast device pages 4..8
        assert_eq!(v.pick(), 4);
        v.on_access(4);
        assert_eq!(v.pick(), 5);
        v.on_access(5);
        v.on_access(6);
        assert_eq!(v.pick(), 7);
        v.on_access(7);
        // All hot: fallback is the lowest fast page; there is always a victim.
        assert_eq!(v.cold_count(), 0);
        assert_eq!(v.pick(), 4);
        v.on_clear_all();
        assert_eq!(v.pick(), 4);
        // Accesses outside the fast range are ignored.
        v.on_access(100);
        assert_eq!(v.cold_count(), 4);
    }

    #[test]
    fn ptescan_collects_slow_set_pages_ascending_and_clears() {
        let pm = PlacementMap::new(0, 16);
        let mut bits = AccessBitTable::new(0, 16);
        let mut victims = VictimTracker::new(0, 8); // device 0..8 fast
        let mut st = PteScanState::new(1000, 2);

        // Host 12, 9, 3 accessed; 3 is fast-resident so not a candidate.
        bits.set(12);
        bits.set(9);
        bits.set(3);
        victims.on_access(pm.translate(3));

        let cost = st.scan(&mut bits, &pm, &mut victims);
        assert_eq!(cost, 32, "16 pages walked at 2 cycles each");
        assert_eq!(st.pending.iter().copied().collect::<Vec<_>>(), vec![9, 12]);
        assert_eq!(bits.set_count(), 0, "scan clears all bits");
        assert_eq!(victims.cold_count(), 8, "bit clearing resets victim candidates");
        assert_eq!(st.scans, 1);
        assert_eq!(st.pages_walked_total, 16);
    }

    #[test]
    fn ptescan_rescan_replaces_stale_pending() {
        let pm = PlacementMap::new(0, 8);
        let mut bits = AccessBitTable::new(0, 8);
        let mut victims = VictimTracker::new(0, 4);
        let mut st = PteScanState::new(1000, 1);
        bits.set(6);
        st.scan(&mut bits, &pm, &mut victims);
        assert_eq!(st.pending.len(), 1);
        // Nothing accessed since: the stale candidate disappears.
        st.scan(&mut bits, &pm, &mut victims);
        assert!(st.pending.is_empty());
    }

    #[test]
    fn pebs_samples_every_nth_slow_read() {
        let mut st = PebsState::new(3, 64);
        let mut promoted = Vec::new();
        for i in 0..9u64 {
            st.on_slow_read(100 + i);
            while let Some(h) = st.pop_pending() {
                promoted.push(h);
            }
        }
        // Reads 3, 6, 9 (1-indexed) sample pages 102, 105, 108.
        assert_eq!(promoted, vec![102, 105, 108]);
        assert_eq!(st.samples, 3);
    }

    #[test]
    fn pebs_period_one_promotes_every_slow_read() {
        let mut st = PebsState::new(1, 64);
        st.on_slow_read(7);
        st.on_slow_read(8);
        assert_eq!(st.pop_pending(), Some(7));
        assert_eq!(st.pop_pending(), Some(8));
        assert_eq!(st.pop_pending(), None);
    }

    #[test]
    fn pebs_dedups_and_bounds_pending() {
        let mut st = PebsState::new(1, 2);
        st.on_slow_read(1);
        st.on_slow_read(1);
        assert_eq!(st.dropped_duplicate, 1);
        st.on_slow_read(2);
        st.on_slow_read(3);
        assert_eq!(st.dropped_full, 1);
        assert_eq!(st.pop_pending(), Some(1));
        // Popping frees the dedup slot.
        st.on_slow_read(1);
        assert_eq!(st.pending.len(), 2);
    }

    /// With unbounded capacity and immediate drains, the first-promotion
    /// order has a closed form: first occurrence among every Nth element of
    /// the slow-read stream. The sampler must match it exactly, and that
    /// order must be biased toward hot pages.
    #[test]
    fn pebs_promotion_order_tracks_frequency_rank() {
        use crate::workloads::{Generator, WorkloadKind, WorkloadSpec};
        use std::collections::HashMap;

        let mut correlations = Vec::new();
        let mut head_ranks = Vec::new();
        for seed in 0..100u64 {
            let mut g = Generator::new(WorkloadSpec {
                kind: WorkloadKind::Zipf { s: 1.0 },
                working_set_pages: 1000,
                ops: 100_000,
                read_fraction: 1.0,
                seed,
                inter_arrival_cycles: 1,
                shuffle_pages: false,
            });
            let mut st = PebsState::new(4, usize::MAX);
            let mut order: Vec<u64> = Vec::new();
            let mut seen = HashSet::new();
            let mut counts: HashMap<u64, u64> = HashMap::new();
            let mut oracle_order: Vec<u64> = Vec::new();
            let mut oracle_seen = HashSet::new();
            let mut stream_pos = 0u64;
            while let Some(r) = g.next() {
                let page = r.addr.0 / 4096;
                *counts.entry(page).or_default() += 1;
                stream_pos += 1;
                if stream_pos % 4 == 0 && oracle_seen.insert(page) {
                    oracle_order.push(page);
                }
                st.on_slow_read(page);
                while let Some(h) = st.pop_pending() {
                    if seen.insert(h) {
                        order.push(h);
                    }
                }
            }
            assert_eq!(order, oracle_order, "sampler deviates from periodic thinning");

            // Frequency rank (descending count, page index tiebreak).
            let mut by_freq: Vec<u64> = order.clone();
            by_freq.sort_by_key(|p| (std::cmp::Reverse(counts[p]), *p));
            let freq_rank: HashMap<u64, usize> =
                by_freq.iter().enumerate().map(|(i, &p)| (p, i)).collect();
            let n = order.len() as f64;
            let d2: f64 = order
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let d = i as f64 - freq_rank[p] as f64;
                    d * d
                })
                .sum();
            correlations.push(1.0 - 6.0 * d2 / (n * (n * n - 1.0)));
            head_ranks.push(
                order[..100].iter().map(|p| freq_rank[p] as f64).sum::<f64>() / 100.0,
            );
        }
        // First-occurrence order is a noisy frequency estimator (ties in
        // the tail order arbitrarily), so global rank correlation sits well
        // below 1 even for a perfect sampler; these runs measure 0.56 mean
        // / 0.51 min over the 100 fixed seeds. An uninformative order would
        // give 0 correlation and a ~500 mean head rank.
        let mean = correlations.iter().sum::<f64>() / correlations.len() as f64;
        assert!(mean > 0.5, "mean Spearman correlation {mean:.3} over 100 runs");
        let head = head_ranks.iter().sum::<f64>() / head_ranks.len() as f64;
        assert!(head < 300.0, "first promotions should skew hot, mean rank {head:.1}");
    }
}
