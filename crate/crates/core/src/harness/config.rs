//! JSON configuration: strict parsing, validation with field paths, and
//! the fully-resolved form echoed into every report.
//!
//! Parsing is two-stage: raw serde structs reject unknown keys (silent
//! typos are hard errors), then validation fills defaults and cross-checks
//! fields, reporting the offending field path. The resulting
//! [`ResolvedConfig`] contains every effective value, including derived
//! layout (page counts, metadata reservation), so no behavior depends on a
//! default that is not visible in the report's `effective_config` block.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::emucore::{RegionConfig, Tier};
use crate::memmodel::PAGE_SIZE;
use crate::migrate::MigrationBudgetConfig;
use crate::policies::PolicyKind;
use crate::profiler::ProfilerConfig;
use crate::remap::{RemapCache, RemapCacheConfig, RemapTables};
use crate::workloads::{WorkloadKind, WorkloadSpec};

#[derive(Debug, Error, PartialEq)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

/// Migration execution parameters shared by the device policy and the
/// CPU-copy baselines.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MigrationConfig {
    pub budget: MigrationBudgetConfig,
    /// Software overhead charged per page a baseline moves (kernel path);
    /// the device migration engine has no such cost.
    pub cpu_overhead_cycles_per_page: u64,
}

impl Default for MigrationConfig {
    fn default() -> Self {
        MigrationConfig {
            budget: MigrationBudgetConfig::default(),
            cpu_overhead_cycles_per_page: 2000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReportConfig {
    pub sampling_interval_cycles: u64,
    pub json_path: Option<String>,
    pub csv_path: Option<String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { sampling_interval_cycles: 200_000, json_path: None, csv_path: None }
    }
}

/// The single fast region a tiering policy promotes into.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct FastRegion {
    pub id: u32,
    pub start_page: u64,
    pub pages: u64,
}

/// A validated configuration with every default and derived value filled.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResolvedConfig {
    pub regions: Vec<RegionConfig>,
    pub base_latency_cycles: u64,
    pub clock_hz: u64,
    pub policy: PolicyKind,
    pub profiler: ProfilerConfig,
    pub remap_cache: RemapCacheConfig,
    pub migration: MigrationConfig,
    pub workload: WorkloadSpec,
    pub seed: u64,
    pub report: ReportConfig,
    // Derived layout, recorded for transparency.
    pub total_pages: u64,
    /// Device pages reserved at the bottom of fast memory for the
    /// translation tables; reserved under every policy so capacity is
    /// comparable across policies.
    pub metadata_pages: u64,
    pub host_visible_pages: u64,
    /// Workload page 0 maps to this host page.
    pub host_base_page: u64,
    pub fast_region: Option<FastRegion>,
}

impl ResolvedConfig {
    /// Span of the device address space in bytes.
    pub fn span_bytes(&self) -> u64 {
        self.total_pages * PAGE_SIZE
    }

    /// The managed fast page range [start, end) excluding metadata.
    pub fn managed_fast_pages(&self) -> Option<(u64, u64)> {
        self.fast_region.map(|f| {
            let lo = f.start_page.max(self.metadata_pages);
            (lo, f.start_page + f.pages)
        })
    }
}

// ---------------------------------------------------------------------
// Raw (strict) schema
// ---------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    regions: Vec<RawRegion>,
    base_latency_cycles: Option<u64>,
    clock_hz: Option<u64>,
    policy: Option<RawPolicy>,
    profiler: Option<RawProfiler>,
    remap_cache: Option<RawRemapCache>,
    migration: Option<RawMigration>,
    workload: RawWorkload,
    seed: Option<u64>,
    report: Option<RawReport>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    id: u32,
    start: u64,
    end: u64,
    latency_cycles: u64,
    bw_budget: u64,
    interval_cycles: u64,
    tier: Option<Tier>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    kind: String,
    scan_interval_cycles: Option<u64>,
    scan_cycles_per_page: Option<u64>,
    sample_period: Option<u64>,
    bit_clear_interval_cycles: Option<u64>,
    pending_capacity: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfiler {
    depth: Option<u32>,
    width: Option<u32>,
    counter_max: Option<u32>,
    hot_threshold: Option<u32>,
    reset_period_cycles: Option<u64>,
    bitmap_period_cycles: Option<u64>,
    scan_budget_pages_per_cycle: Option<u32>,
    cold_buffer_capacity: Option<u64>,
    pair_window_cycles: Option<u64>,
    max_pairs_per_window: Option<u32>,
    pending_pairs_capacity: Option<u64>,
    enabled: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRemapCache {
    capacity_bytes: Option<u64>,
    ways: Option<u32>,
    miss_fifo_depth: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMigration {
    bytes_per_second: Option<u64>,
    window_cycles: Option<u64>,
    cpu_overhead_cycles_per_page: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    kind: String,
    s: Option<f64>,
    hot_fraction: Option<f64>,
    hot_prob: Option<f64>,
    path: Option<String>,
    working_set_pages: Option<u64>,
    ops: Option<u64>,
    read_fraction: Option<f64>,
    seed: Option<u64>,
    inter_arrival_cycles: Option<u64>,
    shuffle_pages: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReport {
    sampling_interval_cycles: Option<u64>,
    json_path: Option<String>,
    csv_path: Option<String>,
}

// ---------------------------------------------------------------------
// Parsing / overrides
// ---------------------------------------------------------------------

/// Parses and validates a config from JSON text.
pub fn parse_config_str(json: &str) -> Result<ResolvedConfig, ConfigError> {
    let v: Value = serde_json::from_str(json)
        .map_err(|e| ConfigError::at("$", format!("invalid JSON: {e}")))?;
    parse_config_value(v)
}

/// Parses and validates a config from a JSON value (after overrides).
pub fn parse_config_value(v: Value) -> Result<ResolvedConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_value(v)
        .map_err(|e| ConfigError::at("$", e.to_string()))?;
    resolve(raw)
}

/// Parses a standalone workload spec written in the same dialect as a
/// config's `workload` block (same defaults, same unknown-key rejection).
pub fn parse_workload_value(v: Value) -> Result<WorkloadSpec, ConfigError> {
    let raw: RawWorkload =
        serde_json::from_value(v).map_err(|e| ConfigError::at("workload", e.to_string()))?;
    resolve_workload(raw, 0)
}

/// Applies `key.path=value` overrides onto the JSON tree before parsing.
/// Values parse as JSON when possible (numbers, bools, quoted strings,
/// objects) and fall back to plain strings. Array elements are addressed
/// by numeric segment (`regions.0.latency_cycles`); intermediate objects
/// are created on demand, but array indexes must already exist.
pub fn apply_overrides(root: &mut Value, overrides: &[(String, String)]) -> Result<(), ConfigError> {
    for (path, raw_value) in overrides {
        let value: Value =
            serde_json::from_str(raw_value).unwrap_or_else(|_| Value::String(raw_value.clone()));
        let segments: Vec<&str> = path.split('.').collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(ConfigError::at(path.clone(), "empty path segment in override"));
        }
        let mut cur = &mut *root;
        for (i, seg) in segments.iter().enumerate() {
            let last = i + 1 == segments.len();
            if let Ok(idx) = seg.parse::<usize>() {
                let arr = cur.as_array_mut().ok_or_else(|| {
                    ConfigError::at(path.clone(), format!("segment `{seg}` indexes a non-array"))
                })?;
                let len = arr.len();
                let slot = arr.get_mut(idx).ok_or_else(|| {
                    ConfigError::at(
                        path.clone(),
                        format!("index {idx} out of bounds (array length {len})"),
                    )
                })?;
                if last {
                    *slot = value;
                    break;
                }
                cur = slot;
            } else {
                let obj = cur.as_object_mut().ok_or_else(|| {
                    ConfigError::at(path.clone(), format!("segment `{seg}` keys into a non-object"))
                })?;
                if last {
                    obj.insert(seg.to_string(), value);
                    break;
                }
                cur = obj.entry(seg.to_string()).or_insert_with(|| Value::Object(Default::default()));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------

fn resolve(raw: RawConfig) -> Result<ResolvedConfig, ConfigError> {
    let clock_hz = raw.clock_hz.unwrap_or(200_000_000);
    if clock_hz == 0 {
        return Err(ConfigError::at("clock_hz", "clock must be nonzero"));
    }
    let base_latency_cycles = raw.base_latency_cycles.unwrap_or(40);
    let seed = raw.seed.unwrap_or(0);

    let regions = resolve_regions(raw.regions)?;
    let total_pages: u64 = regions.iter().map(|r| r.pages()).sum();

    let policy = resolve_policy(raw.policy)?;
    let workload = resolve_workload(raw.workload, seed)?;
    let migration = resolve_migration(raw.migration)?;
    let report = resolve_report(raw.report)?;
    let remap_cache = resolve_remap_cache(raw.remap_cache)?;
    let profiler = resolve_profiler(raw.profiler, &policy)?;

    // Layout: translation metadata is reserved at the bottom of the device
    // space under every policy, so fast capacity is comparable across runs.
    let metadata_pages = RemapTables::metadata_pages_for(total_pages);
    if metadata_pages >= total_pages {
        return Err(ConfigError::at(
            "regions",
            format!("device of {total_pages} pages cannot hold its own {metadata_pages} metadata pages"),
        ));
    }
    let host_visible_pages = total_pages - metadata_pages;
    let host_base_page = metadata_pages;

    let fast_regions: Vec<&RegionConfig> =
        regions.iter().filter(|r| r.tier == Tier::Fast).collect();
    let needs_tiering = !matches!(policy, PolicyKind::None);
    let fast_region = match fast_regions.as_slice() {
        [] if needs_tiering => {
            return Err(ConfigError::at(
                "regions",
                "tiering policies need exactly one region with tier = \"fast\"",
            ));
        }
        [] => None,
        [f] => Some(FastRegion {
            id: f.id,
            start_page: f.start_page(),
            pages: f.pages(),
        }),
        _ if needs_tiering => {
            return Err(ConfigError::at(
                "regions",
                format!(
                    "tiering policies need exactly one fast region, found {}",
                    fast_regions.len()
                ),
            ));
        }
        _ => None,
    };

    if needs_tiering {
        let f = fast_region.expect("checked above");
        if f.start_page != 0 {
            return Err(ConfigError::at(
                "regions",
                "the fast region must start at device address 0 (metadata lives at the bottom of fast memory)",
            ));
        }
        if metadata_pages >= f.pages {
            return Err(ConfigError::at(
                "regions",
                format!(
                    "fast region of {} pages cannot hold {metadata_pages} metadata pages and still tier",
                    f.pages
                ),
            ));
        }
    }

    // The profiler watches one fast region's bitmap; it cannot run without
    // exactly one fast region (observation-only use under other policies is
    // fine, but the region constraint is the same).
    if profiler.enabled && fast_region.is_none() {
        return Err(ConfigError::at(
            "profiler.enabled",
            "the profiler requires exactly one region with tier = \"fast\"",
        ));
    }

    // A full page-table scan must fit inside its own interval, or the CPU
    // falls further behind every epoch and the workload starves forever.
    if let PolicyKind::PteScan { scan_interval_cycles, scan_cycles_per_page } = policy {
        let per_scan = scan_cycles_per_page.checked_mul(host_visible_pages).ok_or_else(|| {
            ConfigError::at("policy.scan_cycles_per_page", "scan cost overflows u64")
        })?;
        if per_scan >= scan_interval_cycles {
            return Err(ConfigError::at(
                "policy.scan_interval_cycles",
                format!(
                    "a full scan of {host_visible_pages} pages costs {per_scan} cycles, \
                     which must be less than scan_interval_cycles ({scan_interval_cycles})"
                ),
            ));
        }
    }

    // Generated workloads must fit the host-visible space.
    if !matches!(workload.kind, WorkloadKind::TraceFile { .. })
        && workload.working_set_pages > host_visible_pages
    {
        return Err(ConfigError::at(
            "workload.working_set_pages",
            format!(
                "working set of {} pages exceeds the {host_visible_pages} host-visible pages",
                workload.working_set_pages
            ),
        ));
    }

    let cfg = ResolvedConfig {
        regions,
        base_latency_cycles,
        clock_hz,
        policy,
        profiler,
        remap_cache,
        migration,
        workload,
        seed,
        report,
        total_pages,
        metadata_pages,
        host_visible_pages,
        host_base_page,
        fast_region,
    };
    Ok(cfg)
}

fn resolve_regions(raw: Vec<RawRegion>) -> Result<Vec<RegionConfig>, ConfigError> {
    if raw.is_empty() {
        return Err(ConfigError::at("regions", "at least one region is required"));
    }
    let mut regions: Vec<RegionConfig> = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        let p = |field: &str| format!("regions[{i}].{field}");
        if r.start % PAGE_SIZE != 0 {
            return Err(ConfigError::at(p("start"), format!("{:#x} not 4 KiB aligned", r.start)));
        }
        if r.end % PAGE_SIZE != 0 {
            return Err(ConfigError::at(p("end"), format!("{:#x} not 4 KiB aligned", r.end)));
        }
        if r.start >= r.end {
            return Err(ConfigError::at(p("end"), "end must be greater than start"));
        }
        if r.bw_budget == 0 {
            return Err(ConfigError::at(p("bw_budget"), "must be nonzero"));
        }
        if r.interval_cycles == 0 {
            return Err(ConfigError::at(p("interval_cycles"), "must be nonzero"));
        }
        regions.push(RegionConfig {
            id: r.id,
            start: r.start,
            end: r.end,
            latency_cycles: r.latency_cycles,
            bw_budget: r.bw_budget,
            interval_cycles: r.interval_cycles,
            tier: r.tier.unwrap_or_default(),
        });
    }
    let mut sorted = regions.clone();
    sorted.sort_by_key(|r| r.start);
    let mut expected = 0u64;
    for (i, r) in sorted.iter().enumerate() {
        if r.start != expected {
            let what = if r.start < expected { "overlaps the previous region" } else { "leaves a gap" };
            return Err(ConfigError::at(
                format!("regions[{i}].start"),
                format!("{:#x} {what} (regions must tile the space from 0)", r.start),
            ));
        }
        expected = r.end;
        for other in &sorted[i + 1..] {
            if other.id == r.id {
                return Err(ConfigError::at(
                    "regions",
                    format!("duplicate region id {}", r.id),
                ));
            }
        }
    }
    let total_pages: u64 = expected / PAGE_SIZE;
    if total_pages > u32::MAX as u64 {
        return Err(ConfigError::at(
            "regions",
            format!("device span of {total_pages} pages exceeds table entry width"),
        ));
    }
    Ok(sorted)
}

fn resolve_policy(raw: Option<RawPolicy>) -> Result<PolicyKind, ConfigError> {
    let Some(raw) = raw else { return Ok(PolicyKind::None) };
    // Per-kind parameter whitelists: a parameter set for the wrong kind is
    // a typo, not something to silently ignore.
    let forbid = |fields: &[(&str, bool)]| -> Result<(), ConfigError> {
        for (f, set) in fields {
            if *set {
                return Err(ConfigError::at(
                    format!("policy.{f}"),
                    format!("not a parameter of policy kind `{}`", raw.kind),
                ));
            }
        }
        Ok(())
    };
    match raw.kind.as_str() {
        "none" | "device" => {
            forbid(&[
                ("scan_interval_cycles", raw.scan_interval_cycles.is_some()),
                ("scan_cycles_per_page", raw.scan_cycles_per_page.is_some()),
                ("sample_period", raw.sample_period.is_some()),
                ("bit_clear_interval_cycles", raw.bit_clear_interval_cycles.is_some()),
                ("pending_capacity", raw.pending_capacity.is_some()),
            ])?;
            Ok(if raw.kind == "none" { PolicyKind::None } else { PolicyKind::Device })
        }
        "pte_scan" => {
            forbid(&[
                ("sample_period", raw.sample_period.is_some()),
                ("bit_clear_interval_cycles", raw.bit_clear_interval_cycles.is_some()),
                ("pending_capacity", raw.pending_capacity.is_some()),
            ])?;
            let scan_interval_cycles = raw.scan_interval_cycles.unwrap_or(1_000_000);
            if scan_interval_cycles == 0 {
                return Err(ConfigError::at("policy.scan_interval_cycles", "must be nonzero"));
            }
            Ok(PolicyKind::PteScan {
                scan_interval_cycles,
                scan_cycles_per_page: raw.scan_cycles_per_page.unwrap_or(2),
            })
        }
        "pebs_sample" => {
            forbid(&[
                ("scan_interval_cycles", raw.scan_interval_cycles.is_some()),
                ("scan_cycles_per_page", raw.scan_cycles_per_page.is_some()),
            ])?;
            let sample_period = raw.sample_period.unwrap_or(64);
            if sample_period == 0 {
                return Err(ConfigError::at("policy.sample_period", "must be nonzero"));
            }
            let bit_clear_interval_cycles = raw.bit_clear_interval_cycles.unwrap_or(1_000_000);
            if bit_clear_interval_cycles == 0 {
                return Err(ConfigError::at("policy.bit_clear_interval_cycles", "must be nonzero"));
            }
            let pending_capacity = raw.pending_capacity.unwrap_or(64);
            if pending_capacity == 0 {
                return Err(ConfigError::at("policy.pending_capacity", "must be nonzero"));
            }
            Ok(PolicyKind::PebsSample {
                sample_period,
                bit_clear_interval_cycles,
                pending_capacity,
            })
        }
        other => Err(ConfigError::at(
            "policy.kind",
            format!("unknown policy `{other}` (expected none, pte_scan, pebs_sample, device)"),
        )),
    }
}

fn resolve_workload(raw: RawWorkload, master_seed: u64) -> Result<WorkloadSpec, ConfigError> {
    let only_for = |field: &str, set: bool, kind: &str| -> Result<(), ConfigError> {
        if set {
            Err(ConfigError::at(
                format!("workload.{field}"),
                format!("not a parameter of workload kind `{kind}`"),
            ))
        } else {
            Ok(())
        }
    };
    let kind = match raw.kind.as_str() {
        "uniform" | "scan" => {
            only_for("s", raw.s.is_some(), &raw.kind)?;
            only_for("hot_fraction", raw.hot_fraction.is_some(), &raw.kind)?;
            only_for("hot_prob", raw.hot_prob.is_some(), &raw.kind)?;
            only_for("path", raw.path.is_some(), &raw.kind)?;
            if raw.kind == "uniform" {
                WorkloadKind::Uniform
            } else {
                WorkloadKind::Scan
            }
        }
        "zipf" => {
            only_for("hot_fraction", raw.hot_fraction.is_some(), "zipf")?;
            only_for("hot_prob", raw.hot_prob.is_some(), "zipf")?;
            only_for("path", raw.path.is_some(), "zipf")?;
            let s = raw
                .s
                .ok_or_else(|| ConfigError::at("workload.s", "zipf requires the exponent `s`"))?;
            WorkloadKind::Zipf { s }
        }
        "hotspot" => {
            only_for("s", raw.s.is_some(), "hotspot")?;
            only_for("path", raw.path.is_some(), "hotspot")?;
            let hot_fraction = raw.hot_fraction.ok_or_else(|| {
                ConfigError::at("workload.hot_fraction", "hotspot requires hot_fraction")
            })?;
            let hot_prob = raw.hot_prob.ok_or_else(|| {
                ConfigError::at("workload.hot_prob", "hotspot requires hot_prob")
            })?;
            WorkloadKind::Hotspot { hot_fraction, hot_prob }
        }
        "trace_file" => {
            only_for("s", raw.s.is_some(), "trace_file")?;
            only_for("hot_fraction", raw.hot_fraction.is_some(), "trace_file")?;
            only_for("hot_prob", raw.hot_prob.is_some(), "trace_file")?;
            only_for("working_set_pages", raw.working_set_pages.is_some(), "trace_file")?;
            only_for("shuffle_pages", raw.shuffle_pages.is_some(), "trace_file")?;
            let path = raw.path.ok_or_else(|| {
                ConfigError::at("workload.path", "trace_file requires a path")
            })?;
            WorkloadKind::TraceFile { path }
        }
        other => {
            return Err(ConfigError::at(
                "workload.kind",
                format!("unknown workload `{other}` (expected uniform, zipf, scan, hotspot, trace_file)"),
            ));
        }
    };

    let is_trace = matches!(kind, WorkloadKind::TraceFile { .. });
    let working_set_pages = match raw.working_set_pages {
        Some(w) => w,
        None if is_trace => 0,
        None => {
            return Err(ConfigError::at(
                "workload.working_set_pages",
                "required for generated workloads",
            ));
        }
    };
    let ops = match raw.ops {
        Some(o) => o,
        None if is_trace => 0, // whole file
        None => return Err(ConfigError::at("workload.ops", "required for generated workloads")),
    };

    let spec = WorkloadSpec {
        kind,
        working_set_pages,
        ops,
        read_fraction: raw.read_fraction.unwrap_or(1.0),
        seed: raw.seed.unwrap_or(master_seed),
        inter_arrival_cycles: raw.inter_arrival_cycles.unwrap_or(1),
        shuffle_pages: raw.shuffle_pages.unwrap_or(false),
    };
    spec.validate().map_err(|m| ConfigError::at("workload", m))?;
    Ok(spec)
}

fn resolve_migration(raw: Option<RawMigration>) -> Result<MigrationConfig, ConfigError> {
    let d = MigrationConfig::default();
    let Some(raw) = raw else { return Ok(d) };
    let window_cycles = raw.window_cycles.unwrap_or(d.budget.window_cycles);
    if window_cycles == 0 {
        return Err(ConfigError::at("migration.window_cycles", "must be nonzero"));
    }
    Ok(MigrationConfig {
        budget: MigrationBudgetConfig {
            bytes_per_second: raw.bytes_per_second.unwrap_or(d.budget.bytes_per_second),
            window_cycles,
        },
        cpu_overhead_cycles_per_page: raw
            .cpu_overhead_cycles_per_page
            .unwrap_or(d.cpu_overhead_cycles_per_page),
    })
}

fn resolve_report(raw: Option<RawReport>) -> Result<ReportConfig, ConfigError> {
    let d = ReportConfig::default();
    let Some(raw) = raw else { return Ok(d) };
    let sampling_interval_cycles =
        raw.sampling_interval_cycles.unwrap_or(d.sampling_interval_cycles);
    if sampling_interval_cycles == 0 {
        return Err(ConfigError::at("report.sampling_interval_cycles", "must be nonzero"));
    }
    Ok(ReportConfig {
        sampling_interval_cycles,
        json_path: raw.json_path,
        csv_path: raw.csv_path,
    })
}

fn resolve_remap_cache(raw: Option<RawRemapCache>) -> Result<RemapCacheConfig, ConfigError> {
    let d = RemapCacheConfig::default();
    let cfg = match raw {
        None => d,
        Some(raw) => RemapCacheConfig {
            capacity_bytes: raw.capacity_bytes.unwrap_or(d.capacity_bytes),
            ways: raw.ways.unwrap_or(d.ways),
            entry_bytes: d.entry_bytes,
            miss_fifo_depth: raw.miss_fifo_depth.unwrap_or(d.miss_fifo_depth),
        },
    };
    if cfg.miss_fifo_depth == 0 {
        return Err(ConfigError::at("remap_cache.miss_fifo_depth", "must be at least 1"));
    }
    // Dry-build to surface geometry errors (sets must be a power of two).
    RemapCache::new(&cfg).map_err(|e| ConfigError::at("remap_cache", e.to_string()))?;
    Ok(cfg)
}

fn resolve_profiler(
    raw: Option<RawProfiler>,
    policy: &PolicyKind,
) -> Result<ProfilerConfig, ConfigError> {
    let d = ProfilerConfig::default();
    let is_device = matches!(policy, PolicyKind::Device);
    let cfg = match raw {
        None => ProfilerConfig { enabled: is_device, ..d },
        Some(raw) => ProfilerConfig {
            depth: raw.depth.unwrap_or(d.depth),
            width: raw.width.unwrap_or(d.width),
            counter_max: raw.counter_max.unwrap_or(d.counter_max),
            hot_threshold: raw.hot_threshold.unwrap_or(d.hot_threshold),
            reset_period_cycles: raw.reset_period_cycles.unwrap_or(d.reset_period_cycles),
            bitmap_period_cycles: raw.bitmap_period_cycles.unwrap_or(d.bitmap_period_cycles),
            scan_budget_pages_per_cycle: raw
                .scan_budget_pages_per_cycle
                .unwrap_or(d.scan_budget_pages_per_cycle),
            cold_buffer_capacity: raw
                .cold_buffer_capacity
                .unwrap_or(d.cold_buffer_capacity as u64)
                as usize,
            pair_window_cycles: raw.pair_window_cycles.unwrap_or(d.pair_window_cycles),
            max_pairs_per_window: raw.max_pairs_per_window.unwrap_or(d.max_pairs_per_window),
            pending_pairs_capacity: raw
                .pending_pairs_capacity
                .unwrap_or(d.pending_pairs_capacity as u64)
                as usize,
            enabled: raw.enabled.unwrap_or(is_device),
        },
    };
    if is_device && !cfg.enabled {
        return Err(ConfigError::at(
            "profiler.enabled",
            "the device policy requires the profiler; disable by choosing policy `none` instead",
        ));
    }
    for (field, ok) in [
        ("depth", cfg.depth >= 1),
        ("width", cfg.width >= 1),
        ("hot_threshold", cfg.hot_threshold >= 1 && cfg.hot_threshold <= cfg.counter_max),
        ("reset_period_cycles", cfg.reset_period_cycles >= 1),
        ("bitmap_period_cycles", cfg.bitmap_period_cycles >= 1),
        ("scan_budget_pages_per_cycle", cfg.scan_budget_pages_per_cycle >= 1),
        ("cold_buffer_capacity", cfg.cold_buffer_capacity >= 1),
        ("pair_window_cycles", cfg.pair_window_cycles >= 1),
        ("max_pairs_per_window", cfg.max_pairs_per_window >= 1),
        ("pending_pairs_capacity", cfg.pending_pairs_capacity >= 1),
    ] {
        if !ok {
            return Err(ConfigError::at(
                format!("profiler.{field}"),
                "out of range (must be >= 1; hot_threshold must not exceed counter_max)",
            ));
        }
    }
    Ok(cfg)
}
