//! Host-to-device page remapping.
//!
//! The remapping unit owns two metadata tables resident in a reserved prefix
//! of fast memory: `remap` (host page -> device page) and `reverse` (device
//! page -> host page). Translation consults a small set-associative cache in
//! front of the tables; a miss costs one fast-region metadata read. A
//! migration swaps two device pages: while the transaction is in flight the
//! unit blocks subsequent host requests, and on commit it updates both
//! tables and the two affected cache entries in place.
//!
//! Invariant maintained throughout: `remap` restricted to host-visible pages
//! is a bijection onto device pages, and `reverse` is its exact inverse.
//! Metadata pages sit below the host-visible range and are never migration
//! targets, so translation can never return one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memmodel::PageIndex;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RemapError {
    #[error("host page {page} outside host-visible range {lo}..{hi}")]
    OutOfRange { page: PageIndex, lo: PageIndex, hi: PageIndex },
    #[error("device page {page} outside device range 0..{total}")]
    DeviceOutOfRange { page: PageIndex, total: PageIndex },
    #[error("a migration transaction is already in flight")]
    Busy,
    #[error("no migration transaction is in flight")]
    NotInFlight,
    #[error("remap config error: {0}")]
    Config(String),
    #[error("migration pair touches a non-migratable page {page}")]
    NotMigratable { page: PageIndex },
}

/// A device-page pair selected for migration: a hot page currently in slow
/// memory and a cold page currently in fast memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MigrationPair {
    pub hot_dpa: PageIndex,
    pub cold_dpa: PageIndex,
}

/// The forward and reverse translation tables.
pub struct RemapTables {
    remap: Vec<u32>,
    reverse: Vec<u32>,
    total_pages: u64,
    metadata_pages: u64,
}

impl RemapTables {
    /// Builds identity tables over `total_pages`. The first `metadata_pages`
    /// pages model the table residency itself: they must fit in the fast
    /// region and are excluded from the host-visible range.
    pub fn new(
        total_pages: u64,
        metadata_pages: u64,
        fast_region_pages: u64,
    ) -> Result<Self, RemapError> {
        if total_pages == 0 {
            return Err(RemapError::Config("device has zero pages".into()));
        }
        if total_pages > u32::MAX as u64 {
            return Err(RemapError::Config(format!(
                "device page count {total_pages} exceeds table entry width"
            )));
        }
        if metadata_pages >= fast_region_pages {
            return Err(RemapError::Config(format!(
                "metadata ({metadata_pages} pages) does not fit the fast region \
                 ({fast_region_pages} pages)"
            )));
        }
        let ident: Vec<u32> = (0..total_pages as u32).collect();
        Ok(RemapTables { remap: ident.clone(), reverse: ident, total_pages, metadata_pages })
    }

    /// Bytes of metadata needed for both tables over `total_pages` pages,
    /// assuming 4-byte entries.
    pub fn metadata_bytes(total_pages: u64) -> u64 {
        total_pages * 4 * 2
    }

    /// Pages of metadata needed for both tables over `total_pages` pages.
    pub fn metadata_pages_for(total_pages: u64) -> u64 {
        Self::metadata_bytes(total_pages).div_ceil(crate::memmodel::PAGE_SIZE)
    }

    pub fn total_pages(&self) -> u64 {
        self.total_pages
    }

    pub fn metadata_pages(&self) -> u64 {
        self.metadata_pages
    }

    /// Host pages the host is allowed to touch.
    pub fn host_visible(&self) -> std::ops::Range<PageIndex> {
        self.metadata_pages..self.total_pages
    }

    fn check_host(&self, h: PageIndex) -> Result<(), RemapError> {
        if h < self.metadata_pages || h >= self.total_pages {
            Err(RemapError::OutOfRange { page: h, lo: self.metadata_pages, hi: self.total_pages })
        } else {
            Ok(())
        }
    }

    fn check_device(&self, d: PageIndex) -> Result<(), RemapError> {
        if d >= self.total_pages {
            Err(RemapError::DeviceOutOfRange { page: d, total: self.total_pages })
        } else {
            Ok(())
        }
    }

    /// Table lookup: host page to device page.
    pub fn translate_page(&self, h: PageIndex) -> Result<PageIndex, RemapError> {
        self.check_host(h)?;
        Ok(self.remap[h as usize] as PageIndex)
    }

    /// Reverse lookup: device page to the host page mapped onto it.
    pub fn reverse_page(&self, d: PageIndex) -> Result<PageIndex, RemapError> {
        self.check_device(d)?;
        Ok(self.reverse[d as usize] as PageIndex)
    }

    /// Swaps the mappings of the two host pages currently resident at the
    /// given device pages. Both device pages must be host-visible mappings
    /// (metadata is never migratable).
    pub fn swap_by_device(&mut self, a: PageIndex, b: PageIndex) -> Result<(), RemapError> {
        self.check_device(a)?;
        self.check_device(b)?;
        let ha = self.reverse[a as usize] as u64;
        let hb = self.reverse[b as usize] as u64;
        if ha < self.metadata_pages {
            return Err(RemapError::NotMigratable { page: a });
        }
        if hb < self.metadata_pages {
            return Err(RemapError::NotMigratable { page: b });
        }
        self.remap[ha as usize] = b as u32;
        self.remap[hb as usize] = a as u32;
        self.reverse.swap(a as usize, b as usize);
        Ok(())
    }

    /// Checks that remap/reverse are mutually inverse bijections. O(n);
    /// intended for tests and debug assertions.
    pub fn is_permutation(&self) -> bool {
        if self.remap.len() != self.reverse.len() {
            return false;
        }
        self.remap
            .iter()
            .enumerate()
            .all(|(h, &d)| self.reverse.get(d as usize) == Some(&(h as u32)))
    }
}

/// Configuration for the set-associative remapping cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemapCacheConfig {
    /// Total cache capacity in bytes.
    pub capacity_bytes: u64,
    /// Associativity.
    pub ways: u32,
    /// Modeled bytes per entry (tag + translation).
    pub entry_bytes: u32,
    /// Requests that may queue behind an outstanding miss.
    pub miss_fifo_depth: usize,
}

impl Default for RemapCacheConfig {
    fn default() -> Self {
        RemapCacheConfig { capacity_bytes: 2 << 20, ways: 16, entry_bytes: 8, miss_fifo_depth: 64 }
    }
}

#[derive(Clone, Copy, Default)]
struct CacheEntry {
    valid: bool,
    host_page: u64,
    device_page: u64,
    last_used: u64,
}

/// Set-associative translation cache with LRU replacement.
pub struct RemapCache {
    entries: Vec<CacheEntry>,
    sets: usize,
    ways: usize,
    set_mask: u64,
    stamp: u64,
    hits: u64,
    misses: u64,
}

impl RemapCache {
    pub fn new(cfg: &RemapCacheConfig) -> Result<Self, RemapError> {
        if cfg.ways == 0 || cfg.entry_bytes == 0 {
            return Err(RemapError::Config("cache ways and entry size must be nonzero".into()));
        }
        let line = cfg.ways as u64 * cfg.entry_bytes as u64;
        if cfg.capacity_bytes == 0 || cfg.capacity_bytes % line != 0 {
            return Err(RemapError::Config(format!(
                "cache capacity {} is not a multiple of ways*entry_bytes {}",
                cfg.capacity_bytes, line
            )));
        }
        let sets = cfg.capacity_bytes / line;
        if !sets.is_power_of_two() {
            return Err(RemapError::Config(format!("cache set count {sets} is not a power of two")));
        }
        Ok(RemapCache {
            entries: vec![CacheEntry::default(); (sets * cfg.ways as u64) as usize],
            sets: sets as usize,
            ways: cfg.ways as usize,
            set_mask: sets - 1,
            stamp: 0,
            hits: 0,
            misses: 0,
        })
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    /// Number of sets (capacity / (ways * entry_bytes)).
    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    fn set_range(&self, h: PageIndex) -> std::ops::Range<usize> {
        let set = (h & self.set_mask) as usize;
        set * self.ways..(set + 1) * self.ways
    }

    /// Looks up a translation, updating LRU state and hit/miss counters.
    pub fn lookup(&mut self, h: PageIndex) -> Option<PageIndex> {
        self.stamp += 1;
        let range = self.set_range(h);
        for e in &mut self.entries[range] {
            if e.valid && e.host_page == h {
                e.last_used = self.stamp;
                self.hits += 1;
                return Some(e.device_page);
            }
        }
        self.misses += 1;
        None
    }

    /// Installs a translation after a miss is filled, evicting the LRU way.
    pub fn install(&mut self, h: PageIndex, d: PageIndex) {
        self.stamp += 1;
        let range = self.set_range(h);
        let entries = &mut self.entries[range];
        // Reuse an existing entry for the same page if present.
        if let Some(e) = entries.iter_mut().find(|e| e.valid && e.host_page == h) {
            e.device_page = d;
            e.last_used = self.stamp;
            return;
        }
        let victim = entries
            .iter_mut()
            .min_by_key(|e| if e.valid { e.last_used } else { 0 })
            .expect("nonzero ways");
        *victim = CacheEntry { valid: true, host_page: h, device_page: d, last_used: self.stamp };
    }

    /// Write-update on migration commit: refreshes the entry if cached,
    /// without allocating. Returns whether an entry was present.
    pub fn update_if_present(&mut self, h: PageIndex, d: PageIndex) -> bool {
        let range = self.set_range(h);
        for e in &mut self.entries[range] {
            if e.valid && e.host_page == h {
                e.device_page = d;
                return true;
            }
        }
        false
    }

    /// Cached translation without LRU/statistics side effects.
    pub fn peek(&self, h: PageIndex) -> Option<PageIndex> {
        let range = self.set_range(h);
        self.entries[range.clone()]
            .iter()
            .find(|e| e.valid && e.host_page == h)
            .map(|e| e.device_page)
    }

    /// Iterates all valid entries (tests: cache/table coherence).
    pub fn valid_entries(&self) -> impl Iterator<Item = (PageIndex, PageIndex)> + '_ {
        self.entries.iter().filter(|e| e.valid).map(|e| (e.host_page, e.device_page))
    }
}

/// Outcome of a front-end translation attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lookup {
    /// Cache hit: zero added cycles.
    Hit(PageIndex),
    /// Cache miss: the translation (already resolved from the tables) costs
    /// one fast-region metadata read before the request may proceed.
    Miss(PageIndex),
}

/// In-flight migration transaction bookkeeping.
#[derive(Clone, Copy, Debug)]
struct Txn {
    pair: MigrationPair,
    meta_done_cycle: u64,
}

/// The remapping unit: tables + cache + transaction state.
pub struct RemapUnit {
    pub tables: RemapTables,
    pub cache: RemapCache,
    txn: Option<Txn>,
    metadata_reads: u64,
    metadata_writes: u64,
}

impl RemapUnit {
    pub fn new(tables: RemapTables, cache: RemapCache) -> Self {
        RemapUnit { tables, cache, txn: None, metadata_reads: 0, metadata_writes: 0 }
    }

    pub fn metadata_reads(&self) -> u64 {
        self.metadata_reads
    }

    pub fn metadata_writes(&self) -> u64 {
        self.metadata_writes
    }

    pub fn migration_in_flight(&self) -> bool {
        self.txn.is_some()
    }

    /// Translates one host page. On a miss the returned translation is only
    /// usable after the metadata read completes; the caller charges that
    /// read (one fast-region read) and then calls [`RemapUnit::fill_miss`].
    ///
    /// Callers must not translate while a migration transaction is in
    /// flight; the engine queues host requests during that window.
    pub fn translate(&mut self, h: PageIndex) -> Result<Lookup, RemapError> {
        debug_assert!(self.txn.is_none(), "translation while migration in flight");
        if let Some(d) = self.cache.lookup(h) {
            // The cache can never contradict the tables (commit updates it).
            debug_assert_eq!(d, self.tables.remap[h as usize] as u64);
            self.tables.check_host(h)?;
            return Ok(Lookup::Hit(d));
        }
        let d = self.tables.translate_page(h)?;
        self.metadata_reads += 1;
        Ok(Lookup::Miss(d))
    }

    /// Installs the translation fetched by a miss's metadata read.
    pub fn fill_miss(&mut self, h: PageIndex, d: PageIndex) {
        self.cache.install(h, d);
    }

    /// Starts a migration transaction: validates the pair, charges the two
    /// reverse-table metadata reads (issued back to back, each taking
    /// `meta_read_latency` cycles), and blocks the host until commit.
    /// Returns the cycle at which the metadata reads complete.
    pub fn begin_migration(
        &mut self,
        pair: MigrationPair,
        now: u64,
        meta_read_latency: u64,
    ) -> Result<u64, RemapError> {
        if self.txn.is_some() {
            return Err(RemapError::Busy);
        }
        self.tables.check_device(pair.hot_dpa)?;
        self.tables.check_device(pair.cold_dpa)?;
        for d in [pair.hot_dpa, pair.cold_dpa] {
            if (self.tables.reverse[d as usize] as u64) < self.tables.metadata_pages {
                return Err(RemapError::NotMigratable { page: d });
            }
        }
        self.metadata_reads += 2;
        let meta_done_cycle = now + 1 + meta_read_latency;
        self.txn = Some(Txn { pair, meta_done_cycle });
        Ok(meta_done_cycle)
    }

    pub fn txn_meta_done_cycle(&self) -> Option<u64> {
        self.txn.map(|t| t.meta_done_cycle)
    }

    /// Commits the in-flight transaction: swaps the table entries, updates
    /// the two affected cache entries in place, and unblocks the host.
    pub fn commit_migration(&mut self) -> Result<MigrationPair, RemapError> {
        let txn = self.txn.take().ok_or(RemapError::NotInFlight)?;
        let MigrationPair { hot_dpa, cold_dpa } = txn.pair;
        self.tables.swap_by_device(hot_dpa, cold_dpa)?;
        // After the swap: reverse[cold] is the host page now mapped to the
        // old cold slot (the hot page), and vice versa.
        let h_hot = self.tables.reverse_page(cold_dpa)?;
        let h_cold = self.tables.reverse_page(hot_dpa)?;
        self.cache.update_if_present(h_hot, cold_dpa);
        self.cache.update_if_present(h_cold, hot_dpa);
        // Two table entries in each of remap and reverse are rewritten.
        self.metadata_writes += 4;
        Ok(txn.pair)
    }
}
