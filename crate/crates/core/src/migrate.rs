//! Page migration execution and budget accounting.
//!
//! A device-side migration swaps one fast page with one slow page. The
//! migration engine has its own port into the media controllers, so its
//! line transfers take the raw region read latency but never consume host
//! bandwidth slots. Lines of the two pages are read interleaved, one issue
//! per cycle (fast line 0, slow line 0, fast line 1, ...), so the swap
//! drains in roughly `2 * lines + max(latency)` cycles instead of the
//! sequential `lines * latency` a copy loop would take.
//!
//! Both the device policy and CPU-copy baselines run under the same
//! byte-per-window migration budget so policy comparisons hold migration
//! bandwidth equal.

use serde::{Deserialize, Serialize};

use crate::emucore::Tier;
use crate::memmodel::{LINES_PER_PAGE, PAGE_SIZE};

/// Bytes moved by one swap: both pages are rewritten.
pub const SWAP_BYTES: u64 = 2 * PAGE_SIZE;

/// One line-read issue slot in a swap schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LineIssue {
    pub cycle: u64,
    pub tier: Tier,
    /// Line index within the page, 0..LINES_PER_PAGE.
    pub line: u32,
}

/// The issue schedule for a swap starting at `start`: 2 * LINES_PER_PAGE
/// issues on consecutive cycles, alternating fast/slow.
pub fn swap_line_issues(start: u64) -> Vec<LineIssue> {
    let mut v = Vec::with_capacity(2 * LINES_PER_PAGE as usize);
    for i in 0..LINES_PER_PAGE as u32 {
        v.push(LineIssue { cycle: start + 2 * i as u64, tier: Tier::Fast, line: i });
        v.push(LineIssue { cycle: start + 2 * i as u64 + 1, tier: Tier::Slow, line: i });
    }
    v
}

/// Completion timing of one device-side swap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JobTiming {
    pub start_cycle: u64,
    /// Cycle the last line response arrives.
    pub last_response_cycle: u64,
    /// First cycle after all data is in flight-free state; commit happens here.
    pub end_cycle: u64,
    pub bytes_moved: u64,
}

/// Computes swap timing analytically from the two regions' read latencies.
/// `base` is the device-wide base latency, `l_fast`/`l_slow` the per-region
/// latency registers.
pub fn device_swap_timing(start: u64, base: u64, l_fast: u64, l_slow: u64) -> JobTiming {
    let lines = LINES_PER_PAGE;
    let last_fast = start + 2 * (lines - 1) + base + l_fast;
    let last_slow = start + 2 * (lines - 1) + 1 + base + l_slow;
    let last_response_cycle = last_fast.max(last_slow);
    JobTiming {
        start_cycle: start,
        last_response_cycle,
        end_cycle: last_response_cycle + 1,
        bytes_moved: SWAP_BYTES,
    }
}

/// Migration bandwidth budget over fixed windows.
///
/// Each window admits `bytes_per_window = floor(bytes_per_second *
/// window_cycles / clock_hz)` bytes; a swap is admitted only if its full
/// byte cost fits in the current window's remainder. `bytes_per_second ==
/// 0` disables the budget.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MigrationBudgetConfig {
    pub bytes_per_second: u64,
    pub window_cycles: u64,
}

impl Default for MigrationBudgetConfig {
    fn default() -> Self {
        MigrationBudgetConfig { bytes_per_second: 256 << 20, window_cycles: 200_000 }
    }
}

#[derive(Clone, Debug)]
pub struct MigrationBudget {
    bytes_per_window: u64,
    window_cycles: u64,
    unlimited: bool,
    consumed_this_window: u64,
    pub max_consumed_in_window: u64,
    pub total_consumed: u64,
    pub rejections: u64,
}

impl MigrationBudget {
    pub fn new(cfg: &MigrationBudgetConfig, clock_hz: u64) -> Self {
        assert!(cfg.window_cycles > 0, "budget window must be nonzero");
        assert!(clock_hz > 0, "clock must be nonzero");
        let bytes_per_window =
            (cfg.bytes_per_second as u128 * cfg.window_cycles as u128 / clock_hz as u128) as u64;
        MigrationBudget {
            bytes_per_window,
            window_cycles: cfg.window_cycles,
            unlimited: cfg.bytes_per_second == 0,
            consumed_this_window: 0,
            max_consumed_in_window: 0,
            total_consumed: 0,
            rejections: 0,
        }
    }

    pub fn bytes_per_window(&self) -> u64 {
        self.bytes_per_window
    }

    pub fn window_cycles(&self) -> u64 {
        self.window_cycles
    }

    /// Call once per cycle; opens a fresh window on window boundaries.
    pub fn on_cycle(&mut self, now: u64) {
        if now % self.window_cycles == 0 {
            self.consumed_this_window = 0;
        }
    }

    /// Whether `bytes` more would still fit in the current window.
    pub fn admits(&self, bytes: u64) -> bool {
        self.unlimited || self.consumed_this_window + bytes <= self.bytes_per_window
    }

    /// Consumes budget for a job. Returns false (and counts a rejection)
    /// if the window cannot fit it.
    pub fn try_consume(&mut self, bytes: u64) -> bool {
        if !self.admits(bytes) {
            self.rejections += 1;
            return false;
        }
        self.consumed_this_window += bytes;
        self.total_consumed += bytes;
        self.max_consumed_in_window = self.max_consumed_in_window.max(self.consumed_this_window);
        true
    }

    pub fn consumed_this_window(&self) -> u64 {
        self.consumed_this_window
    }
}
