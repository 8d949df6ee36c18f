//! Turns reference-model executions into memory-access traces under a
//! chosen point streaming order, with the per-level cube register that
//! makes ray-first ordering pay off.

use std::io::{BufRead, BufReader, BufWriter, Read as IoRead, Write as IoWrite};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::hashgrid::{
    cube_entry_indices, cube_vertices, scale_point, HashGridConfig, Point3, VertexCoord,
};
use crate::nerf::MlpConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReqKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Ht,
    HtB,
    Mlp,
    MlpB,
}

impl Kernel {
    pub fn code(self) -> u8 {
        match self {
            Kernel::Ht => 0,
            Kernel::HtB => 1,
            Kernel::Mlp => 2,
            Kernel::MlpB => 3,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => Kernel::Ht,
            1 => Kernel::HtB,
            2 => Kernel::Mlp,
            3 => Kernel::MlpB,
            _ => return Err(SimError::Parse(format!("unknown kernel code {c}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryRequest {
    pub id: u64,
    pub kind: ReqKind,
    pub logical_address: u64,
    pub size_bytes: u32,
    pub kernel: Kernel,
    pub issue_order: u64,
}

/// Span of consecutive requests belonging to one cube lookup (one point
/// at one level); row coalescing merges only within a span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeSpan {
    pub level: u32,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub order: Option<StreamOrder>,
    pub batch_points: u64,
    pub register_model: bool,
    pub hash_kind: Option<crate::hashgrid::HashKind>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccessTrace {
    pub requests: Vec<MemoryRequest>,
    pub cube_spans: Vec<CubeSpan>,
    pub meta: TraceMeta,
}

impl AccessTrace {
    pub fn read_bytes(&self) -> u64 {
        self.requests
            .iter()
            .filter(|r| r.kind == ReqKind::Read)
            .map(|r| r.size_bytes as u64)
            .sum()
    }

    pub fn write_bytes(&self) -> u64 {
        self.requests
            .iter()
            .filter(|r| r.kind == ReqKind::Write)
            .map(|r| r.size_bytes as u64)
            .sum()
    }
}

/// Logical byte layout: per-level table regions concatenated in level
/// order, then MLP parameters, then activation regions. Documented so
/// traces stay portable across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AddressLayout {
    pub level_base: Vec<u64>,
    pub level_bytes: Vec<u64>,
    pub mlp_param_base: u64,
    pub mlp_param_bytes: u64,
    pub activation_base: u64,
    pub entry_bytes: u64,
}

const REGION_ALIGN: u64 = 4096;

fn align_up(x: u64, a: u64) -> u64 {
    x.div_ceil(a) * a
}

impl AddressLayout {
    pub fn new(grid: &HashGridConfig, mlp: &MlpConfig) -> Self {
        let entry_bytes = grid.entry_bytes() as u64;
        let mut level_base = Vec::new();
        let mut level_bytes = Vec::new();
        let mut cursor = 0u64;
        for lvl in grid.level_configs() {
            level_base.push(cursor);
            let bytes = lvl.entries * entry_bytes;
            level_bytes.push(bytes);
            cursor += align_up(bytes, REGION_ALIGN);
        }
        let mlp_param_base = cursor;
        let mlp_param_bytes =
            mlp.weight_count(grid.levels * grid.feature_dim) * grid.bytes_per_feature as u64;
        cursor += align_up(mlp_param_bytes, REGION_ALIGN);
        AddressLayout {
            level_base,
            level_bytes,
            mlp_param_base,
            mlp_param_bytes,
            activation_base: cursor,
            entry_bytes,
        }
    }

    pub fn entry_address(&self, level: usize, index: u64) -> u64 {
        self.level_base[level] + index * self.entry_bytes
    }

    /// Level owning a table address, if any.
    pub fn level_of(&self, addr: u64) -> Option<usize> {
        for (l, (base, bytes)) in self.level_base.iter().zip(&self.level_bytes).enumerate() {
            if addr >= *base && addr < base + bytes {
                return Some(l);
            }
        }
        None
    }
}

/// Points grouped by ray, in along-ray order.
#[derive(Debug, Clone, Default)]
pub struct RayBatch {
    pub rays: Vec<Vec<Point3>>,
}

impl RayBatch {
    pub fn total_points(&self) -> usize {
        self.rays.iter().map(|r| r.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamOrder {
    RayFirst,
    RandomShuffle,
}

/// Flatten a ray batch into a point stream. RayFirst keeps rays
/// contiguous and per-ray order intact; RandomShuffle permutes all
/// points with the given seed.
pub fn order_points(batch: &RayBatch, mode: StreamOrder, seed: u64) -> Vec<Point3> {
    let mut stream: Vec<Point3> = batch.rays.iter().flatten().copied().collect();
    if mode == StreamOrder::RandomShuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        stream.shuffle(&mut rng);
    }
    stream
}

/// Per-level cache of recently seen cube bases. Capacity is one cube per
/// level by default; larger capacities are for sensitivity studies.
#[derive(Debug, Clone)]
pub struct CubeRegister {
    slots: Vec<Vec<VertexCoord>>,
    capacity: usize,
}

impl CubeRegister {
    pub fn new(levels: usize, capacity: usize) -> Self {
        Self { slots: vec![Vec::new(); levels], capacity: capacity.max(1) }
    }

    /// True if the cube was already resident; inserts it otherwise (LRU).
    pub fn probe(&mut self, level: usize, base: VertexCoord) -> bool {
        let slot = &mut self.slots[level];
        if let Some(pos) = slot.iter().position(|b| *b == base) {
            let hit = slot.remove(pos);
            slot.push(hit);
            return true;
        }
        if slot.len() == self.capacity {
            slot.remove(0);
        }
        slot.push(base);
        false
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HtTraceStats {
    pub points: u64,
    pub cube_lookups: u64,
    pub register_hits: u64,
}

/// Generate the hash-table lookup trace for a point stream.
///
/// Per point per level: on a cube-register hit no requests are emitted;
/// otherwise one read per vertex entry (read-modify-write pairs for the
/// backward kernel).
pub fn generate_ht_trace(
    stream: &[Point3],
    grid: &HashGridConfig,
    layout: &AddressLayout,
    register_on: bool,
    register_capacity: usize,
    kernel: Kernel,
) -> Result<(AccessTrace, HtTraceStats)> {
    assert!(matches!(kernel, Kernel::Ht | Kernel::HtB));
    let levels = grid.level_configs();
    let mut reg = CubeRegister::new(levels.len(), register_capacity);
    let mut trace = AccessTrace::default();
    let mut stats = HtTraceStats { points: stream.len() as u64, ..Default::default() };
    let mut id = 0u64;
    let mut order = 0u64;
    let entry_bytes = layout.entry_bytes as u32;
    for p in stream {
        for lvl in &levels {
            stats.cube_lookups += 1;
            let (base, fracs) = scale_point(*p, lvl);
            if register_on && reg.probe(lvl.level_index as usize, base) {
                stats.register_hits += 1;
                continue;
            }
            let cube = cube_vertices(base, fracs);
            let idx = cube_entry_indices(&cube, lvl, grid)?;
            let start = trace.requests.len();
            for i in idx {
                let addr = layout.entry_address(lvl.level_index as usize, i);
                trace.requests.push(MemoryRequest {
                    id,
                    kind: ReqKind::Read,
                    logical_address: addr,
                    size_bytes: entry_bytes,
                    kernel,
                    issue_order: order,
                });
                id += 1;
                order += 1;
                if kernel == Kernel::HtB {
                    trace.requests.push(MemoryRequest {
                        id,
                        kind: ReqKind::Write,
                        logical_address: addr,
                        size_bytes: entry_bytes,
                        kernel,
                        issue_order: order,
                    });
                    id += 1;
                    order += 1;
                }
            }
            trace.cube_spans.push(CubeSpan {
                level: lvl.level_index,
                start,
                len: trace.requests.len() - start,
            });
        }
    }
    trace.meta.batch_points = stream.len() as u64;
    trace.meta.register_model = register_on;
    trace.meta.hash_kind = Some(grid.hash_kind);
    Ok((trace, stats))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RowStats {
    pub cubes: u64,
    pub row_requests: u64,
}

impl RowStats {
    pub fn mean_rows_per_cube(&self) -> f64 {
        if self.cubes == 0 {
            0.0
        } else {
            self.row_requests as f64 / self.cubes as f64
        }
    }
}

/// Merge the per-entry requests of each cube into row-granularity
/// requests (requests to the same DRAM row merge into one).
pub fn coalesce_to_rows(trace: &AccessTrace, row_bytes: u64) -> Result<(AccessTrace, RowStats)> {
    if !row_bytes.is_power_of_two() {
        return Err(SimError::Config("row_bytes must be a power of two".into()));
    }
    let mut out = AccessTrace { meta: trace.meta.clone(), ..Default::default() };
    let mut stats = RowStats::default();
    let mut covered = vec![false; trace.requests.len()];
    let mut id = 0u64;
    let mut order = 0u64;

    let emit = |req: &MemoryRequest, row: u64, id: &mut u64, order: &mut u64, out: &mut AccessTrace| {
        out.requests.push(MemoryRequest {
            id: *id,
            kind: req.kind,
            logical_address: row * row_bytes,
            size_bytes: row_bytes as u32,
            kernel: req.kernel,
            issue_order: *order,
        });
        *id += 1;
        *order += 1;
    };

    for span in &trace.cube_spans {
        stats.cubes += 1;
        let mut rows_seen: Vec<(u64, ReqKind)> = Vec::with_capacity(4);
        for i in span.start..span.start + span.len {
            covered[i] = true;
            let req = &trace.requests[i];
            let row = req.logical_address / row_bytes;
            if !rows_seen.contains(&(row, req.kind)) {
                rows_seen.push((row, req.kind));
                if req.kind == ReqKind::Read {
                    stats.row_requests += 1;
                }
                emit(req, row, &mut id, &mut order, &mut out);
            }
        }
    }
    // Requests outside any span pass through individually at row granularity.
    for (i, req) in trace.requests.iter().enumerate() {
        if !covered[i] {
            let row = req.logical_address / row_bytes;
            emit(req, row, &mut id, &mut order, &mut out);
        }
    }
    Ok((out, stats))
}

/// Analytic byte counts for one MLP-style streaming kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpTraceSpec {
    pub input_bytes: u64,
    pub param_bytes: u64,
    pub output_bytes: u64,
    pub intermediate_bytes: u64,
}

/// Streaming trace for the MLP kernels: reads of inputs and weights,
/// writes of intermediates and outputs, chunked at row granularity so
/// byte totals match the analytic counts exactly.
pub fn generate_mlp_trace(
    spec: &MlpTraceSpec,
    layout: &AddressLayout,
    kernel: Kernel,
    row_bytes: u64,
) -> AccessTrace {
    let mut trace = AccessTrace::default();
    let mut id = 0u64;
    let mut order = 0u64;
    let mut cursor = layout.activation_base;
    let push = |kind: ReqKind, base: &mut u64, total: u64, trace: &mut AccessTrace,
                    id: &mut u64, order: &mut u64| {
        let mut remaining = total;
        while remaining > 0 {
            let chunk = remaining.min(row_bytes);
            trace.requests.push(MemoryRequest {
                id: *id,
                kind,
                logical_address: *base,
                size_bytes: chunk as u32,
                kernel,
                issue_order: *order,
            });
            *base += chunk;
            remaining -= chunk;
            *id += 1;
            *order += 1;
        }
    };
    // Inputs then weights stream in; intermediates and outputs stream out.
    push(ReqKind::Read, &mut cursor, spec.input_bytes, &mut trace, &mut id, &mut order);
    let mut pbase = layout.mlp_param_base;
    push(ReqKind::Read, &mut pbase, spec.param_bytes, &mut trace, &mut id, &mut order);
    push(ReqKind::Write, &mut cursor, spec.intermediate_bytes, &mut trace, &mut id, &mut order);
    push(ReqKind::Write, &mut cursor, spec.output_bytes, &mut trace, &mut id, &mut order);
    trace
}

// --- trace file format -------------------------------------------------
//
// 16-byte header: 8-byte magic, u32 version, u32 reserved; then packed
// 30-byte little-endian records (id u64, kind u8, address u64, size u32,
// kernel u8, order u64).

const TRACE_MAGIC: &[u8; 8] = b"NBNMPTR\0";
const TRACE_VERSION: u32 = 1;
const RECORD_BYTES: usize = 30;

pub fn write_trace(path: &Path, trace: &AccessTrace) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(TRACE_MAGIC)?;
    w.write_all(&TRACE_VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for r in &trace.requests {
        w.write_all(&r.id.to_le_bytes())?;
        w.write_all(&[if r.kind == ReqKind::Read { 0u8 } else { 1u8 }])?;
        w.write_all(&r.logical_address.to_le_bytes())?;
        w.write_all(&r.size_bytes.to_le_bytes())?;
        w.write_all(&[r.kernel.code()])?;
        w.write_all(&r.issue_order.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<AccessTrace> {
    let mut rd = BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 16];
    rd.read_exact(&mut header)
        .map_err(|_| SimError::Parse("trace shorter than its 16-byte header".into()))?;
    if &header[..8] != TRACE_MAGIC {
        return Err(SimError::Parse("bad trace magic".into()));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != TRACE_VERSION {
        return Err(SimError::Parse(format!("unsupported trace version {version}")));
    }
    let mut requests = Vec::new();
    let mut rec = [0u8; RECORD_BYTES];
    loop {
        match rd.read_exact(&mut rec) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        requests.push(MemoryRequest {
            id: u64::from_le_bytes(rec[0..8].try_into().unwrap()),
            kind: if rec[8] == 0 { ReqKind::Read } else { ReqKind::Write },
            logical_address: u64::from_le_bytes(rec[9..17].try_into().unwrap()),
            size_bytes: u32::from_le_bytes(rec[17..21].try_into().unwrap()),
            kernel: Kernel::from_code(rec[21])?,
            issue_order: u64::from_le_bytes(rec[22..30].try_into().unwrap()),
        });
    }
    Ok(AccessTrace { requests, cube_spans: Vec::new(), meta: TraceMeta::default() })
}

/// CSV dump with the same columns as the binary records.
pub fn write_trace_csv<W: IoWrite>(mut w: W, trace: &AccessTrace) -> Result<()> {
    writeln!(w, "id,kind,address,size_bytes,kernel,issue_order")?;
    for r in &trace.requests {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.id,
            if r.kind == ReqKind::Read { "R" } else { "W" },
            r.logical_address,
            r.size_bytes,
            r.kernel.code(),
            r.issue_order
        )?;
    }
    Ok(())
}

/// Parse the CSV dump back (used by tests to round-trip the dump mode).
pub fn read_trace_csv<R: IoRead>(r: R) -> Result<AccessTrace> {
    let rd = BufReader::new(r);
    let mut requests = Vec::new();
    for (ln, line) in rd.lines().enumerate() {
        let line = line?;
        if ln == 0 || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(SimError::Parse(format!("csv line {ln}: expected 6 columns")));
        }
        let num = |s: &str| -> Result<u64> {
            s.parse().map_err(|_| SimError::Parse(format!("csv line {ln}: bad number {s}")))
        };
        requests.push(MemoryRequest {
            id: num(cols[0])?,
            kind: if cols[1] == "R" { ReqKind::Read } else { ReqKind::Write },
            logical_address: num(cols[2])?,
            size_bytes: num(cols[3])? as u32,
            kernel: Kernel::from_code(num(cols[4])? as u8)?,
            issue_order: num(cols[5])?,
        });
    }
    Ok(AccessTrace { requests, cube_spans: Vec::new(), meta: TraceMeta::default() })
}
