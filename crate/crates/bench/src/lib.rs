//! Shared scenario builders for the benchmarks.

use serde_json::json;
use tiersim_core::harness::{parse_config_value, ResolvedConfig};

/// A two-region device-policy scenario sized so a run finishes in tens of
/// milliseconds: the workload exercises admission, translation, the
/// profiler, and the migration path without long drain tails.
pub fn device_scenario(ops: u64) -> ResolvedConfig {
    parse_config_value(json!({
        "base_latency_cycles": 40,
        "regions": [
            {"id": 0, "start": 0u64, "end": 1024u64 * 4096, "latency_cycles": 0,
             "bw_budget": 128, "interval_cycles": 100, "tier": "fast"},
            {"id": 1, "start": 1024u64 * 4096, "end": 4096u64 * 4096, "latency_cycles": 64,
             "bw_budget": 64, "interval_cycles": 100, "tier": "slow"}
        ],
        "policy": {"kind": "device"},
        "profiler": {
            "hot_threshold": 4, "reset_period_cycles": 100_000,
            "bitmap_period_cycles": 20_000, "pair_window_cycles": 20_000,
            "max_pairs_per_window": 32, "cold_buffer_capacity": 512,
            "pending_pairs_capacity": 64, "scan_budget_pages_per_cycle": 4
        },
        "workload": {"kind": "zipf", "s": 1.0, "working_set_pages": 3000, "ops": ops,
                     "read_fraction": 0.7, "seed": 11, "inter_arrival_cycles": 1,
                     "shuffle_pages": true},
        "migration": {"bytes_per_second": 4u64 << 30, "window_cycles": 200_000},
        "report": {"sampling_interval_cycles": 200_000}
    }))
    .expect("benchmark scenario is valid")
}
