//! Simulation orchestration: configuration, the cycle engine, metrics
//! collection, and report emission.

pub mod config;
pub mod engine;
pub mod metrics;
pub mod report;
pub mod sink;

pub use config::{
    apply_overrides, parse_config_str, parse_config_value, parse_workload_value, ConfigError,
    FastRegion, MigrationConfig, ReportConfig, ResolvedConfig,
};
pub use engine::{run_sim, run_sim_with_sink, SimError};
pub use metrics::{
    BaselineMetrics, IntervalSample, LatencySummary, MetricsBuilder, MigrationSummary,
    RegionCounters, RemapMetrics, SimMetrics, METRICS_SCHEMA_VERSION,
};
pub use report::{to_json_string, write_csv, write_json};
pub use sink::{EventSink, MigrationInitiator, NopSink};
