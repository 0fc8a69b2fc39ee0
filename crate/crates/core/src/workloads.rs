//! Synthetic access-pattern generators and the binary trace-file format.
//!
//! Generators stand in for pointer-chase / key-value / graph benchmark
//! behavior: uniform random, Zipf-skewed, sequential scan, and a
//! hotspot mix. All sampling is seed-deterministic and avoids libm so a
//! given spec+seed produces the identical request stream on every platform
//! (see [`detmath`]).
//!
//! Real traces captured elsewhere can be replayed through the same
//! interface via the `trace` submodule's reader.

pub mod detmath;
pub mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::memmodel::{HostAddr, LineData, MemRequest, Op, CACHELINE_SIZE, LINES_PER_PAGE, PAGE_SIZE};

/// Access pattern. Page indexes produced are zero-based within the working
/// set; the harness relocates them into host-visible space.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadKind {
    Uniform,
    Zipf {
        /// Rank-frequency exponent; weight of rank r is (r+1)^-s.
        s: f64,
    },
    Scan,
    Hotspot {
        /// Fraction of the working set forming the hot set, in (0, 1).
        hot_fraction: f64,
        /// Probability an access lands in the hot set, in [0, 1].
        hot_prob: f64,
    },
    TraceFile {
        path: String,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WorkloadSpec {
    #[serde(flatten)]
    pub kind: WorkloadKind,
    pub working_set_pages: u64,
    /// Number of requests to produce. For TraceFile, 0 means the whole file.
    pub ops: u64,
    /// Probability a request is a read; remainder are full-line writes.
    pub read_fraction: f64,
    pub seed: u64,
    /// Gap between nominal arrival cycles of consecutive requests.
    pub inter_arrival_cycles: u64,
    /// Apply a seeded permutation to generated page indexes so access
    /// frequency rank is decorrelated from initial physical placement.
    pub shuffle_pages: bool,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), String> {
        match &self.kind {
            WorkloadKind::Zipf { s } => {
                if !s.is_finite() || *s <= 0.0 {
                    return Err(format!("zipf exponent s must be finite and > 0, got {s}"));
                }
            }
            WorkloadKind::Hotspot { hot_fraction, hot_prob } => {
                if !(*hot_fraction > 0.0 && *hot_fraction < 1.0) {
                    return Err(format!("hot_fraction must be in (0, 1), got {hot_fraction}"));
                }
                if !(*hot_prob >= 0.0 && *hot_prob <= 1.0) {
                    return Err(format!("hot_prob must be in [0, 1], got {hot_prob}"));
                }
                if self.working_set_pages < 2 {
                    return Err("hotspot needs working_set_pages >= 2".into());
                }
            }
            WorkloadKind::Uniform | WorkloadKind::Scan | WorkloadKind::TraceFile { .. } => {}
        }
        let is_trace = matches!(self.kind, WorkloadKind::TraceFile { .. });
        if !is_trace {
            if self.working_set_pages == 0 {
                return Err("working_set_pages must be > 0".into());
            }
            if self.working_set_pages > u32::MAX as u64 {
                return Err(format!(
                    "working_set_pages {} exceeds the supported maximum {}",
                    self.working_set_pages,
                    u32::MAX
                ));
            }
            if self.ops == 0 {
                return Err("ops must be > 0 for generated workloads".into());
            }
        }
        if !(self.read_fraction >= 0.0 && self.read_fraction <= 1.0) {
            return Err(format!("read_fraction must be in [0, 1], got {}", self.read_fraction));
        }
        Ok(())
    }
}

/// Deterministic payload for write requests. Trace files do not carry
/// payloads, so both generators and the trace reader synthesize them from
/// the request's sequence number and target address; round-tripping a
/// generated stream through a trace file therefore reproduces it exactly.
pub fn synth_payload(seq: u64, addr: u64, size: u8) -> LineData {
    fn splitmix64(x: &mut u64) -> u64 {
        *x = x.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = *x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    let mut state = seq.wrapping_mul(0xd1342543de82ef95) ^ addr;
    let mut bytes = [0u8; CACHELINE_SIZE as usize];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    LineData::new(&bytes[..size as usize])
}

/// Anything that can feed requests into the simulation front-end.
pub trait RequestSource {
    /// The next request, or Ok(None) when the stream is exhausted.
    fn next_request(&mut self) -> Result<Option<MemRequest>, trace::TraceError>;
}

/// Fixed-point scale of the Zipf cumulative table: probabilities map to
/// [0, 2^63].
const CDF_ONE: u64 = 1 << 63;

/// Seeded synthetic request generator.
pub struct Generator {
    spec: WorkloadSpec,
    rng: ChaCha8Rng,
    emitted: u64,
    /// Cumulative fixed-point weights, one entry per rank; last == CDF_ONE.
    zipf_cdf: Vec<u64>,
    /// rank/index -> page permutation when shuffle_pages is set.
    page_perm: Vec<u32>,
    hot_pages: u64,
}

impl Generator {
    /// Builds a generator. Panics if the spec fails validation or is a
    /// TraceFile spec (use `trace::TraceReader` for those).
    pub fn new(spec: WorkloadSpec) -> Self {
        spec.validate().expect("invalid workload spec");
        assert!(
            !matches!(spec.kind, WorkloadKind::TraceFile { .. }),
            "TraceFile specs are served by trace::TraceReader"
        );
        let ws = spec.working_set_pages;
        let rng = ChaCha8Rng::seed_from_u64(spec.seed);

        let zipf_cdf = match spec.kind {
            WorkloadKind::Zipf { s } => build_zipf_cdf(ws, s),
            _ => Vec::new(),
        };

        let page_perm = if spec.shuffle_pages {
            // Fisher-Yates under a stream independent of the draw RNG, so
            // enabling shuffle does not perturb the sampling sequence.
            let mut perm: Vec<u32> = (0..ws as u32).collect();
            let mut prng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x7065726d757465_u64);
            for i in (1..perm.len()).rev() {
                let j = prng.random_range(0..=i);
                perm.swap(i, j);
            }
            perm
        } else {
            Vec::new()
        };

        let hot_pages = match spec.kind {
            WorkloadKind::Hotspot { hot_fraction, .. } => {
                ((ws as f64 * hot_fraction) as u64).clamp(1, ws - 1)
            }
            _ => 0,
        };

        Generator { spec, rng, emitted: 0, zipf_cdf, page_perm, hot_pages }
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    /// Number of pages in the hotspot hot set (0 for other kinds).
    pub fn hot_pages(&self) -> u64 {
        self.hot_pages
    }

    fn draw_op(&mut self) -> Op {
        let rf = self.spec.read_fraction;
        if rf >= 1.0 {
            Op::Read
        } else if rf <= 0.0 {
            Op::Write
        } else if prob_hit(&mut self.rng, rf) {
            Op::Read
        } else {
            Op::Write
        }
    }

    fn draw_page(&mut self) -> (u64, u32) {
        let ws = self.spec.working_set_pages;
        let lines = LINES_PER_PAGE as u32;
        let (rank, line) = match self.spec.kind {
            WorkloadKind::Uniform => {
                (self.rng.random_range(0..ws), self.rng.random_range(0..lines))
            }
            WorkloadKind::Zipf { .. } => {
                let u = self.rng.random::<u64>() >> 1;
                let rank = self.zipf_cdf.partition_point(|&c| c <= u) as u64;
                debug_assert!(rank < ws);
                (rank, self.rng.random_range(0..lines))
            }
            WorkloadKind::Scan => {
                // One line per page per sweep; successive sweeps touch
                // successive lines. Page order is strictly sequential and
                // wraps at the working-set end. No randomness consumed.
                let i = self.emitted;
                ((i % ws), ((i / ws) % LINES_PER_PAGE as u64) as u32)
            }
            WorkloadKind::Hotspot { hot_prob, .. } => {
                let hot = prob_hit(&mut self.rng, hot_prob);
                let rank = if hot {
                    self.rng.random_range(0..self.hot_pages)
                } else {
                    self.rng.random_range(self.hot_pages..ws)
                };
                (rank, self.rng.random_range(0..lines))
            }
            WorkloadKind::TraceFile { .. } => unreachable!(),
        };
        let page =
            if self.page_perm.is_empty() { rank } else { self.page_perm[rank as usize] as u64 };
        (page, line)
    }

    /// Produces the next request, or None once `ops` requests were emitted.
    pub fn next(&mut self) -> Option<MemRequest> {
        if self.emitted >= self.spec.ops {
            return None;
        }
        let seq = self.emitted;
        // Draw order is part of the determinism contract: op, then page/line.
        let op = self.draw_op();
        let (page, line) = self.draw_page();
        self.emitted += 1;

        let addr = HostAddr(page * PAGE_SIZE as u64 + line as u64 * CACHELINE_SIZE as u64);
        let issue_cycle = seq * self.spec.inter_arrival_cycles;
        Some(match op {
            Op::Read => MemRequest::read(addr, CACHELINE_SIZE as u8, issue_cycle),
            Op::Write => {
                MemRequest::write(addr, synth_payload(seq, addr.0, CACHELINE_SIZE as u8), issue_cycle)
            }
        })
    }
}

impl RequestSource for Generator {
    fn next_request(&mut self) -> Result<Option<MemRequest>, trace::TraceError> {
        Ok(self.next())
    }
}

/// Bernoulli(p) using a 53-bit fixed-point threshold, so outcomes depend
/// only on integer comparisons of the RNG stream.
fn prob_hit(rng: &mut ChaCha8Rng, p: f64) -> bool {
    debug_assert!((0.0..=1.0).contains(&p));
    let threshold = (p * (1u64 << 53) as f64) as u64;
    (rng.random::<u64>() >> 11) < threshold
}

/// Builds the fixed-point Zipf CDF: entry r holds P(rank <= r) scaled to
/// CDF_ONE, with the final entry pinned to exactly CDF_ONE.
fn build_zipf_cdf(working_set_pages: u64, s: f64) -> Vec<u64> {
    let n = working_set_pages as usize;
    let mut weights = Vec::with_capacity(n);
    let mut total = 0.0f64;
    for rank in 1..=n as u64 {
        let w = detmath::pow_det(rank as f64, -s);
        weights.push(w);
        total += w;
    }
    let mut cdf = Vec::with_capacity(n);
    let mut cum = 0.0f64;
    for w in weights {
        cum += w;
        let scaled = ((cum / total) * CDF_ONE as f64) as u64;
        cdf.push(scaled.min(CDF_ONE));
    }
    *cdf.last_mut().unwrap() = CDF_ONE;
    debug_assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
    cdf
}
