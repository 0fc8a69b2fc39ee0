//! `tiersim`: command-line front end for the tiered-memory simulator.
//!
//! Subcommands cover the full artifact workflow: `validate` and `run` for
//! JSON configs, `gen-trace` for binary trace production, `probe` for
//! region latency/bandwidth response sweeps (CSV), and `topo` for turning
//! a switch hop count into a region latency suggestion.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime error, 64 usage.
//! `SIM_LOG` (error/info/debug) controls log verbosity on stderr.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use tiersim_core::emucore::{burst_throughput_probe, dependent_latency_probe};
use tiersim_core::harness::{
    apply_overrides, parse_config_value, parse_workload_value, to_json_string, write_csv,
    write_json, ResolvedConfig,
};
use tiersim_core::workloads::trace::TraceWriter;
use tiersim_core::workloads::Generator;
use tiersim_core::{RegionId, WorkloadKind};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "tiersim", version, about = "Tiered-memory device simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a simulation and emit metrics (JSON, plus CSV timeseries).
    Run(RunArgs),
    /// Parse and validate a config without running it.
    Validate {
        /// Path to the simulation config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a binary trace file from a workload spec (JSON).
    GenTrace {
        /// Path to the workload spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output trace path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep a region's latency or bandwidth register; CSV on stdout.
    #[command(subcommand)]
    Probe(ProbeCmd),
    /// Suggest a region latency for a switch topology.
    Topo {
        /// Number of switch hops between host and region.
        #[arg(long)]
        hops: u32,
        /// Latency added per hop, in nanoseconds.
        #[arg(long, default_value_t = 70.0)]
        hop_ns: f64,
        /// Simulator clock the suggestion is expressed in.
        #[arg(long, default_value_t = 200_000_000)]
        clock_hz: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Path to the simulation config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path config override, e.g. `--override workload.seed=7`.
    /// Values parse as JSON where possible, else as strings.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum ProbeCmd {
    /// Sweep the latency register 0..=256 step 32; measured read latency.
    Latency(ProbeArgs),
    /// Sweep the bandwidth register up to its configured value; throughput.
    Bandwidth(ProbeArgs),
}

#[derive(Args)]
struct ProbeArgs {
    /// Path to the simulation config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Region id to probe.
    #[arg(long)]
    region: RegionId,
}

/// Failure classes, each mapped to a distinct exit code.
enum Failure {
    Config(String),
    Runtime(String),
    Usage(String),
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure::Config(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Writes to stdout, treating a closed pipe (`tiersim ... | head`) as
/// normal termination rather than an error.
fn write_stdout(text: &str) -> Result<(), Failure> {
    match io::stdout().write_all(text.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Failure::Runtime(format!("writing stdout: {e}"))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SIM_LOG", "error"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };

    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run(args) => run(args),
        Cmd::Validate { config } => validate(&config),
        Cmd::GenTrace { spec, out } => gen_trace(&spec, &out),
        Cmd::Probe(ProbeCmd::Latency(args)) => probe_latency(&args),
        Cmd::Probe(ProbeCmd::Bandwidth(args)) => probe_bandwidth(&args),
        Cmd::Topo { hops, hop_ns, clock_hz } => topo(hops, hop_ns, clock_hz),
    }
}

/// Reads and parses a config file, applying `key=value` overrides first.
fn load_config(path: &Path, overrides: &[String]) -> Result<ResolvedConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut root: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: invalid JSON: {e}", path.display())))?;

    let pairs: Vec<(String, String)> = overrides
        .iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Failure::Usage(format!("override `{kv}` is not KEY=VALUE")))
        })
        .collect::<Result<_, _>>()?;
    apply_overrides(&mut root, &pairs).map_err(Failure::config)?;

    parse_config_value(root).map_err(Failure::config)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config, &args.overrides)?;
    let metrics = tiersim_core::run_sim(&cfg).map_err(Failure::runtime)?;

    if let Some(path) = &cfg.report.csv_path {
        write_csv(&metrics, Path::new(path))
            .map_err(|e| Failure::Runtime(format!("writing {path}: {e}")))?;
        log::info!("wrote timeseries CSV to {path}");
    }
    match &cfg.report.json_path {
        Some(path) => {
            write_json(&metrics, Path::new(path))
                .map_err(|e| Failure::Runtime(format!("writing {path}: {e}")))?;
            log::info!("wrote metrics JSON to {path}");
            // Human summary on stdout; the full document is in the file.
            let mut s = format!("cycles {}\n", metrics.total_cycles);
            s += &format!(
                "requests {} (reads {}, writes {})\n",
                metrics.host_requests, metrics.host_reads, metrics.host_writes
            );
            s += &format!("slow_access_ratio {:.6}\n", metrics.slow_access_ratio);
            s += &format!(
                "migrations {} (device {}, policy {})\n",
                metrics.migrations.swaps_committed,
                metrics.migrations.device_swaps,
                metrics.migrations.policy_swaps
            );
            s += &format!("metrics {path}\n");
            write_stdout(&s)
        }
        None => write_stdout(&to_json_string(&metrics)),
    }
}

fn validate(path: &Path) -> Result<(), Failure> {
    let cfg = load_config(path, &[])?;
    write_stdout(&format!(
        "ok: {} regions, {} host-visible pages, {} metadata pages\n",
        cfg.regions.len(),
        cfg.host_visible_pages,
        cfg.metadata_pages
    ))
}

fn gen_trace(spec_path: &Path, out: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| Failure::Config(format!("cannot read spec {}: {e}", spec_path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: invalid JSON: {e}", spec_path.display())))?;
    let spec = parse_workload_value(v).map_err(Failure::config)?;
    if matches!(spec.kind, WorkloadKind::TraceFile { .. }) {
        return Err(Failure::Config("gen-trace needs a synthetic workload kind".into()));
    }

    let mut w = TraceWriter::create(out).map_err(Failure::runtime)?;
    let mut g = Generator::new(spec);
    while let Some(req) = g.next() {
        w.push(&req).map_err(Failure::runtime)?;
    }
    let records = w.records_written();
    w.finish().map_err(Failure::runtime)?;
    write_stdout(&format!("wrote {records} records to {}\n", out.display()))
}

/// Returns the probed region's index in the config's region list.
fn region_index(cfg: &ResolvedConfig, id: RegionId) -> Result<usize, Failure> {
    cfg.regions
        .iter()
        .position(|r| r.id == id)
        .ok_or_else(|| Failure::Config(format!("config has no region with id {id}")))
}

fn probe_latency(args: &ProbeArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config, &[])?;
    let idx = region_index(&cfg, args.region)?;

    let mut csv = String::from("latency_register,measured_min,measured_avg,measured_max\n");
    for register in (0..=256u64).step_by(32) {
        let mut regions = cfg.regions.clone();
        regions[idx].latency_cycles = register;
        let rep = dependent_latency_probe(&regions, cfg.base_latency_cycles, args.region, 200)
            .map_err(Failure::runtime)?;
        csv += &format!(
            "{register},{},{},{}\n",
            rep.min_latency_cycles, rep.avg_latency_cycles, rep.max_latency_cycles
        );
    }
    write_stdout(&csv)
}

fn probe_bandwidth(args: &ProbeArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config, &[])?;
    let idx = region_index(&cfg, args.region)?;
    let configured = cfg.regions[idx].bw_budget;

    let mut csv = String::from("bw_register,interval_cycles,lines_per_cycle,mib_per_s\n");
    let mut last = 0;
    for step in 1..=16u64 {
        let register = (configured * step / 16).max(1);
        if register == last {
            continue; // small budgets repeat at coarse steps
        }
        last = register;
        let mut regions = cfg.regions.clone();
        regions[idx].bw_budget = register;
        let rep = burst_throughput_probe(&regions, cfg.base_latency_cycles, args.region, 3200)
            .map_err(Failure::runtime)?;
        let mib_s = rep.throughput * 64.0 * cfg.clock_hz as f64 / (1u64 << 20) as f64;
        csv += &format!(
            "{register},{},{:.6},{:.1}\n",
            regions[idx].interval_cycles, rep.throughput, mib_s
        );
    }
    write_stdout(&csv)
}

fn topo(hops: u32, hop_ns: f64, clock_hz: u64) -> Result<(), Failure> {
    if hop_ns < 0.0 {
        return Err(Failure::Config("hop_ns must be nonnegative".into()));
    }
    let extra_ns = hops as f64 * hop_ns;
    let latency_cycles = (extra_ns * clock_hz as f64 / 1e9).round() as u64;
    let suggestion = json!({
        "hops": hops,
        "hop_ns": hop_ns,
        "extra_latency_ns": extra_ns,
        "clock_hz": clock_hz,
        "latency_cycles": latency_cycles,
        "region": {
            "id": 1,
            "start": 0,
            "end": 0,
            "latency_cycles": latency_cycles,
            "bw_budget": 64,
            "interval_cycles": 100,
            "tier": "slow"
        },
        "note": "fill start/end and bandwidth for your device; latency_cycles reflects the hops"
    });
    let text = serde_json::to_string_pretty(&suggestion).expect("static JSON serializes");
    write_stdout(&format!("{text}\n"))
}
